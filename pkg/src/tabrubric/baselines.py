"""String-level reference metrics: exact match, chrF and ROUGE-L."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

from .similarity import lcs_length
from .table import Table, canonical_serialize

EM, CHRF, ROUGE_L = "em", "chrf", "rouge-l"
CELL_AGG, WHOLE_TEXT = "cell-aggregated", "whole-table-text"
_TOKEN = re.compile(r"\w+", re.UNICODE)
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class BaselineScore:
    metric: str
    value: float
    granularity: str
    empty_input: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"baseline value out of range: {self.value}")

    @property
    def name(self) -> str:
        return f"{self.metric}:{self.granularity}"


def _grid(t: Table) -> list[list[str]]:
    return [list(t.headers)] + t.raw_rows()


def _positions(gt: Table, cand: Table):
    g, c = _grid(gt), _grid(cand)
    rows = max(len(g), len(c))
    cols = max(gt.n_cols, cand.n_cols)
    for i in range(rows):
        for j in range(cols):
            a = g[i][j] if i < len(g) and j < gt.n_cols else None
            b = c[i][j] if i < len(c) and j < cand.n_cols else None
            yield a, b


def exact_match(gt: Table, cand: Table) -> BaselineScore:
    """Share of grid positions (header row included) holding byte-equal cells.

    Positions present in only one table count as mismatches, so any extra or
    missing row/column lowers the score.
    """
    total = hits = 0
    for a, b in _positions(gt, cand):
        total += 1
        hits += a is not None and a == b
    return BaselineScore(EM, hits / total, CELL_AGG)


def _ngrams(text: str, k: int) -> Counter:
    return Counter(text[i:i + k] for i in range(len(text) - k + 1))


def chrf_detail(gt_text: str, cand_text: str, n: int = 6, beta: float = 2.0) -> tuple[float, bool]:
    """chrF and an empty-input flag.

    Whitespace is removed first. Precision and recall are averaged over the
    orders where both strings have n-grams, then combined as F-beta.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    ref = _WS.sub("", gt_text)
    hyp = _WS.sub("", cand_text)
    if not ref or not hyp:
        return (1.0, True) if ref == hyp else (0.0, True)
    ps, rs = [], []
    for k in range(1, n + 1):
        r, h = _ngrams(ref, k), _ngrams(hyp, k)
        if not r or not h:
            continue
        match = sum((r & h).values())
        ps.append(match / sum(h.values()))
        rs.append(match / sum(r.values()))
    p, r = sum(ps) / len(ps), sum(rs) / len(rs)
    b2 = beta * beta
    denom = b2 * p + r
    return ((1 + b2) * p * r / denom if denom else 0.0), False


def chrf(gt_text: str, cand_text: str, n: int = 6, beta: float = 2.0) -> float:
    return chrf_detail(gt_text, cand_text, n, beta)[0]


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def rouge_l(gt_text: str, cand_text: str) -> float:
    """LCS F1 over word tokens; punctuation and whitespace only separate tokens."""
    ref, hyp = tokenize(gt_text), tokenize(cand_text)
    if not ref and not hyp:
        return 1.0
    if not ref or not hyp:
        return 0.0
    lcs = lcs_length(ref, hyp)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hyp), lcs / len(ref)
    return 2 * p * r / (p + r)


def table_text(t: Table) -> str:
    """Canonical serialization of the content only (no provenance fields)."""
    return canonical_serialize(Table(t.column_headers, t.rows)).decode("utf-8")


def _cellwise(gt: Table, cand: Table, fn) -> float:
    vals = [fn(a or "", b or "") if a is not None and b is not None else 0.0
            for a, b in _positions(gt, cand)]
    return sum(vals) / len(vals)


def baseline_scores(gt: Table, cand: Table) -> list[BaselineScore]:
    """All baselines at both granularities, in a fixed order."""
    gtext, ctext = table_text(gt), table_text(cand)
    chrf_whole, empty = chrf_detail(gtext, ctext)
    return [
        exact_match(gt, cand),
        BaselineScore(CHRF, chrf_whole, WHOLE_TEXT, empty),
        BaselineScore(CHRF, _cellwise(gt, cand, chrf), CELL_AGG),
        BaselineScore(ROUGE_L, rouge_l(gtext, ctext), WHOLE_TEXT),
        BaselineScore(ROUGE_L, _cellwise(gt, cand, rouge_l), CELL_AGG),
    ]
