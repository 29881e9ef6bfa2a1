"""End-to-end evaluation of one candidate table against its ground truth."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

from .align import AlignConfig, Alignment, align, refine_with_llm
from .baselines import baseline_scores
from .columns import TypedTable
from .compare import Comparison, compare_aligned_tables
from .llm import LlmClient, ProviderError
from .rubric import RubricReport, WeightConfig, build_rubric
from .table import Table, flatten_hierarchical, read_table, transpose

log = logging.getLogger(__name__)

REPORT_VERSION = "tabx-report/1"
LLM_MODES = ("off", "on", "strict")


@dataclass
class Evaluation:
    alignment: Alignment
    comparison: Comparison
    report: RubricReport
    baselines: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)


def evaluate(gt: Table, cand: Table, weights: Optional[WeightConfig] = None,
             client: Optional[LlmClient] = None, llm: str = "off",
             config: AlignConfig = AlignConfig(), with_baselines: bool = True) -> Evaluation:
    """Flatten, orient, align, compare and score.

    ``llm`` is "off", "on" (provider failures fall back to the deterministic
    result) or "strict" (provider failures propagate as ProviderError).
    """
    if llm not in LLM_MODES:
        raise ValueError(f"llm mode must be one of {LLM_MODES}")
    use_llm = llm != "off" and client is not None
    strict = llm == "strict"
    weights = weights or WeightConfig.paper_default()
    timing: dict = {}
    t0 = time.perf_counter()

    g_flat = flatten_hierarchical(gt)
    c_flat = flatten_hierarchical(cand)
    a, g, c = align(g_flat, c_flat, config)
    timing["align_s"] = time.perf_counter() - t0

    if use_llm:
        oriented = transpose(c_flat) if a.transposed else c_flat
        try:
            a = refine_with_llm(g_flat, oriented, a, client)
        except ProviderError:
            if strict:
                raise
            log.warning("alignment refinement failed; keeping deterministic alignment")

    t1 = time.perf_counter()
    comparison = compare_aligned_tables(g, c, a, client if use_llm else None, llm_strict=strict)
    report = build_rubric(g, c, a, comparison).scored(weights)
    timing["compare_score_s"] = time.perf_counter() - t1

    baselines = baseline_scores(gt, cand) if with_baselines else []
    timing["total_s"] = time.perf_counter() - t0
    return Evaluation(a, comparison, report, baselines, timing)


def evaluate_typed(g: TypedTable, c: TypedTable, a: Alignment, weights: WeightConfig) -> RubricReport:
    return build_rubric(g, c, a, compare_aligned_tables(g, c, a)).scored(weights)


# -- report documents -----------------------------------------------------------------------


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def input_record(path: str, fmt: Optional[str], data: bytes) -> dict:
    return {"path": path, "format": fmt, "sha256": sha256_bytes(data)}


def report_document(ev: Evaluation, inputs: dict) -> dict:
    doc = {
        "version": REPORT_VERSION,
        "inputs": inputs,
        "alignment": ev.alignment.to_dict(),
        "rubric": ev.report.to_dict(),
        "tuples": [t.to_dict() for t in ev.comparison.tuples],
        "baselines": {b.name: b.value for b in ev.baselines},
        "timing": ev.timing,
    }
    doc["digest"] = document_digest(doc)
    return doc


def document_digest(doc: dict) -> str:
    """Hash of the report without timing (and without the digest itself)."""
    body = {k: v for k, v in doc.items() if k not in ("timing", "digest")}
    return sha256_bytes(json.dumps(body, sort_keys=True, ensure_ascii=False).encode("utf-8"))


def dump_document(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def load_document(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != REPORT_VERSION:
        raise ValueError(f"{path}: unsupported report version {doc.get('version')!r}")
    return doc


def evaluate_paths(gt_path: str, cand_path: str, fmt: Optional[str] = None, **kw) -> dict:
    """Read both files and return a report document."""
    with open(gt_path, "rb") as fh:
        gdata = fh.read()
    with open(cand_path, "rb") as fh:
        cdata = fh.read()
    gt = read_table(gt_path, fmt)
    cand = read_table(cand_path, fmt)
    ev = evaluate(gt, cand, **kw)
    inputs = {"gt": input_record(gt_path, fmt, gdata), "cand": input_record(cand_path, fmt, cdata)}
    return report_document(ev, inputs)
