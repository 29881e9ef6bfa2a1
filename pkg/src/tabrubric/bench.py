"""Benchmark scoring, detection quality, ranking agreement and weight sweeps."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Optional, Sequence

from .pipeline import REPORT_VERSION, dump_document, evaluate, input_record, load_document, report_document
from .perturb import ManifestError, load_case_tables, load_manifest
from .rubric import RubricCounts, WeightConfig, compute_score, sweep_weights
from .stats import DetectionOutcome, correlation_battery, detection_metrics, kendall_tau, scores_to_ranking
from .table import canonical_serialize

RUBRIC = "rubric"
# baselines: higher is better, a perfect match scores 1
BASELINE_KEYS = ("em:cell-aggregated", "chrf:whole-table-text", "chrf:cell-aggregated",
                 "rouge-l:whole-table-text", "rouge-l:cell-aggregated")
EVALUATORS = (RUBRIC,) + BASELINE_KEYS


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Optional[str], header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# -- per-case evaluation ------------------------------------------------------------------------


def _case_meta(entry: dict) -> dict:
    keys = ("case_id", "table_id", "kinds", "difficulty", "positive", "formatting_only", "expected")
    return {k: entry.get(k) for k in keys}


def evaluate_case(args: tuple) -> dict:
    bench_dir, entry, weights_dict = args
    clean, pert = load_case_tables(bench_dir, entry)
    ev = evaluate(clean, pert, WeightConfig.from_dict(weights_dict))
    inputs = {
        "gt": input_record(entry["clean"], "json", canonical_serialize(clean)),
        "cand": input_record(entry["perturbed"], "json", canonical_serialize(pert)),
        "case": _case_meta(entry),
    }
    return report_document(ev, inputs)


def evaluate_benchmark(bench_dir: str, weights: WeightConfig, jobs: int = 1) -> list[dict]:
    manifest = load_manifest(bench_dir)
    work = [(bench_dir, e, weights.to_dict()) for e in manifest["cases"]]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(evaluate_case, work, chunksize=8))
    return [evaluate_case(w) for w in work]


def write_reports(docs: Sequence[dict], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for d in docs:
        with open(os.path.join(out_dir, f"{d['inputs']['case']['case_id']}.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(dump_document(d))


def load_reports(report_dir: str) -> list[dict]:
    docs = []
    for name in sorted(os.listdir(report_dir)):
        if name.endswith(".json"):
            doc = load_document(os.path.join(report_dir, name))
            if "case" not in doc.get("inputs", {}):
                raise ManifestError(f"{name}: report carries no benchmark case metadata")
            docs.append(doc)
    if not docs:
        raise ManifestError(f"no {REPORT_VERSION} reports in {report_dir}")
    return docs


def check_reports_match(docs: Sequence[dict], manifest: dict) -> None:
    ids = [e["case_id"] for e in manifest["cases"]]
    if sorted(ids) != sorted(d["inputs"]["case"]["case_id"] for d in docs):
        raise ManifestError("reports do not cover the manifest's cases")


# -- scores and detection --------------------------------------------------------------------


def evaluator_scores(doc: dict) -> dict:
    out = {RUBRIC: doc["rubric"]["score"]}
    out.update({k: doc["baselines"].get(k) for k in BASELINE_KEYS})
    return out


def flagged(evaluator: str, value: float) -> bool:
    """A case is flagged as different when the rubric error exceeds 0 or a baseline falls below 1."""
    return value > 0 if evaluator == RUBRIC else value < 1


def orientation(evaluator: str) -> str:
    return "lower-better" if evaluator == RUBRIC else "higher-better"


PER_CASE_HEADER = (
    "case_id", "table_id", "kinds", "difficulty", "positive", "formatting_only",
    "expected_f", "observed_f", "counts_match", "rubric_score", "rubric_score_decimal",
    "quality_non_paper",
) + BASELINE_KEYS


def _f_signature(f: dict) -> str:
    return ";".join(f"{i}.{e}={f[i][e]}" for i in ("missing", "extra", "partial")
                    for e in ("row", "column", "cell") if f[i][e])


def per_case_rows(docs: Sequence[dict]) -> list[list]:
    rows = []
    for d in docs:
        case = d["inputs"]["case"]
        exp = case["expected"]["counts"]["f"]
        got = d["rubric"]["counts"]["f"]
        rows.append([
            case["case_id"], case["table_id"], "+".join(case["kinds"]), "+".join(case["difficulty"]),
            case["positive"], case["formatting_only"], _f_signature(exp), _f_signature(got),
            exp == got, d["rubric"]["score"], d["rubric"]["score_decimal"],
            d["rubric"]["normalized_quality_non_paper"],
        ] + [d["baselines"].get(k) for k in BASELINE_KEYS])
    return rows


DETECTION_HEADER = ("evaluator", "subset", "n", "tp", "fp", "tn", "fn",
                    "sensitivity", "specificity", "accuracy", "f1", "harmonic3")


def detection_rows(docs: Sequence[dict]) -> list[list]:
    rows = []
    subsets = [("all", lambda c: True), ("formatting-only", lambda c: c["formatting_only"])]
    for ev in EVALUATORS:
        for name, keep in subsets:
            sel = [d for d in docs if keep(d["inputs"]["case"])]
            if not sel:
                continue
            truth = [bool(d["inputs"]["case"]["positive"]) for d in sel]
            flags = [flagged(ev, evaluator_scores(d)[ev]) for d in sel]
            o = DetectionOutcome.from_flags(truth, flags)
            m = detection_metrics(o)
            rows.append([ev, name, len(sel), o.tp, o.fp, o.tn, o.fn, m["sensitivity"],
                         m["specificity"], m["accuracy"], m["f1"], m["harmonic3"]])
    return rows


# -- rankings ----------------------------------------------------------------------------------


def load_rankings(path: str) -> dict:
    """``{"group": [case ids, best first], ...}``; a bare list is one group named "all"."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, list):
        data = {"all": data}
    if not isinstance(data, dict) or not all(isinstance(v, list) for v in data.values()):
        raise ValueError(f"{path}: rankings must map group names to lists of case ids")
    return data


CORRELATION_HEADER = ("evaluator", "group", "metric", "value", "n", "parameters")


def correlation_rows(docs: Sequence[dict], rankings: dict, p: float = 0.9,
                     score_fn=None) -> list[list]:
    by_id = {d["inputs"]["case"]["case_id"]: d for d in docs}
    rows = []
    evaluators = (RUBRIC,) if score_fn else EVALUATORS
    for ev in evaluators:
        per_metric: dict = {}
        for group in sorted(rankings):
            human = rankings[group]
            missing = [c for c in human if c not in by_id]
            if missing:
                raise ManifestError(f"rankings name unknown cases: {missing[:3]}")
            if len(human) < 2:
                continue
            if score_fn:
                scores = {c: score_fn(by_id[c]) for c in human}
            else:
                scores = {c: evaluator_scores(by_id[c])[ev] for c in human}
            auto = scores_to_ranking(scores, orientation(ev))
            for r in correlation_battery(human, auto, p):
                rows.append([ev, group, r["metric"], r["value"], r["n"], r["parameters"]])
                per_metric.setdefault((r["metric"], r["parameters"]), []).append(r["value"])
        for (metric, params), vals in per_metric.items():
            rows.append([ev, "mean", metric, sum(vals) / len(vals), len(vals), params])
    return rows


# -- sweeps -----------------------------------------------------------------------------------


def rescore(doc: dict, w: WeightConfig):
    r = doc["rubric"]
    return compute_score(RubricCounts.from_dict(r["counts"]), r["partial_magnitudes"], w)


SWEEP_DIMS_HEADER = ("beta_missing", "beta_extra", "beta_partial", "alpha_row", "alpha_column",
                     "alpha_cell")


def sweep_rows(docs: Sequence[dict], lows: Sequence, base: WeightConfig,
               rankings: Optional[dict] = None, p: float = 0.9) -> tuple[list[str], list[list]]:
    ids = [d["inputs"]["case"]["case_id"] for d in docs]
    default_scores = {i: float(rescore(d, base)) for i, d in zip(ids, docs)}
    default_rank = scores_to_ranking(default_scores)
    truth = [bool(d["inputs"]["case"]["positive"]) for d in docs]
    header = ["low", "config"] + list(SWEEP_DIMS_HEADER) + [
        "kendall_vs_default", "sensitivity", "specificity", "accuracy", "f1", "harmonic3"]
    metrics = ("spearman_rho", "kendall_tau", "weighted_kendall", "rbo", "footrule")
    if rankings:
        header += [f"mean_{m}" for m in metrics]
    rows = []
    for low in lows:
        for k, w in enumerate(sweep_weights(base, low)):
            scores = {i: float(rescore(d, w)) for i, d in zip(ids, docs)}
            ranking = scores_to_ranking(scores)
            tau = kendall_tau(default_rank, ranking) if len(ids) >= 2 else None
            o = DetectionOutcome.from_flags(truth, [scores[i] > 0 for i in ids])
            m = detection_metrics(o)
            row = [str(low), k] + [str(getattr(w, dim)) for dim in SWEEP_DIMS_HEADER] + [
                tau, m["sensitivity"], m["specificity"], m["accuracy"], m["f1"], m["harmonic3"]]
            if rankings:
                corr = correlation_rows(docs, rankings, p, score_fn=lambda d, w=w: float(rescore(d, w)))
                means = {r[2]: r[3] for r in corr if r[1] == "mean"}
                row += [means.get(mt) for mt in metrics]
            rows.append(row)
    return header, rows
