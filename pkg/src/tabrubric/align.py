"""Row/column correspondence between a ground-truth and a candidate table.

Alignment runs in stages: exact header/cell matching produces strict pairs,
a similarity pass adds relaxed pairs through maximum-weight bipartite
matching, and an optional LLM pass proposes further relaxed pairs among the
leftovers. Later stages never touch pairs made by earlier ones.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .columns import TypedTable, header_key
from .similarity import lcs_ratio
from .table import Table, transpose

if TYPE_CHECKING:
    from .llm import LlmClient

log = logging.getLogger(__name__)

STRICT = "strict"
RELAXED = "relaxed"
_TIE_EPS = 1e-9


@dataclass(frozen=True)
class Pair:
    gt: int
    cand: int
    strictness: str
    score: Optional[float] = None

    def to_dict(self) -> dict:
        return {"gt": self.gt, "cand": self.cand, "strictness": self.strictness, "score": self.score}


@dataclass(frozen=True)
class Alignment:
    gt_shape: tuple
    cand_shape: tuple
    column_map: tuple = ()
    row_map: tuple = ()
    transposed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "column_map", tuple(sorted(self.column_map, key=lambda p: p.gt)))
        object.__setattr__(self, "row_map", tuple(sorted(self.row_map, key=lambda p: p.gt)))

    @property
    def unmatched_gt_rows(self) -> list[int]:
        used = {p.gt for p in self.row_map}
        return [i for i in range(self.gt_shape[0]) if i not in used]

    @property
    def unmatched_cand_rows(self) -> list[int]:
        used = {p.cand for p in self.row_map}
        return [i for i in range(self.cand_shape[0]) if i not in used]

    @property
    def unmatched_gt_cols(self) -> list[int]:
        used = {p.gt for p in self.column_map}
        return [j for j in range(self.gt_shape[1]) if j not in used]

    @property
    def unmatched_cand_cols(self) -> list[int]:
        used = {p.cand for p in self.column_map}
        return [j for j in range(self.cand_shape[1]) if j not in used]

    @property
    def strictness(self) -> str:
        pairs = self.column_map + self.row_map
        return STRICT if all(p.strictness == STRICT for p in pairs) else RELAXED

    def check(self) -> None:
        """Raise ValueError unless the maps are injective and in range."""
        for name, pairs, (ng, nc) in (
            ("row", self.row_map, (self.gt_shape[0], self.cand_shape[0])),
            ("column", self.column_map, (self.gt_shape[1], self.cand_shape[1])),
        ):
            gts = [p.gt for p in pairs]
            cands = [p.cand for p in pairs]
            if len(set(gts)) != len(gts) or len(set(cands)) != len(cands):
                raise ValueError(f"{name} map is not injective")
            if any(not 0 <= g < ng for g in gts) or any(not 0 <= c < nc for c in cands):
                raise ValueError(f"{name} map references an out-of-range index")

    def with_pairs(self, columns: Sequence[Pair] = (), rows: Sequence[Pair] = ()) -> "Alignment":
        return Alignment(self.gt_shape, self.cand_shape, self.column_map + tuple(columns),
                         self.row_map + tuple(rows), self.transposed)

    def to_dict(self) -> dict:
        return {
            "transposed": self.transposed,
            "strictness": self.strictness,
            "gt_shape": list(self.gt_shape),
            "cand_shape": list(self.cand_shape),
            "column_map": [p.to_dict() for p in self.column_map],
            "row_map": [p.to_dict() for p in self.row_map],
            "unmatched_gt_rows": self.unmatched_gt_rows,
            "unmatched_gt_cols": self.unmatched_gt_cols,
            "unmatched_cand_rows": self.unmatched_cand_rows,
            "unmatched_cand_cols": self.unmatched_cand_cols,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Alignment":
        def pairs(items):
            return tuple(Pair(p["gt"], p["cand"], p["strictness"], p.get("score")) for p in items)
        return cls(tuple(d["gt_shape"]), tuple(d["cand_shape"]), pairs(d["column_map"]),
                   pairs(d["row_map"]), bool(d.get("transposed", False)))


@dataclass(frozen=True)
class AlignConfig:
    # strict rows need strictly more than this fraction of paired cells equal
    row_threshold: float = 0.5
    tau_relax: float = 0.5
    header_weight: float = 0.5


@dataclass
class SimilarityMatrix:
    scores: np.ndarray
    axis: str
    gt_index: list = field(default_factory=list)
    cand_index: list = field(default_factory=list)


def _typed(t) -> TypedTable:
    return t if isinstance(t, TypedTable) else TypedTable(t)


# -- exact stage ------------------------------------------------------------------


def exact_align(gt, cand, config: AlignConfig = AlignConfig()) -> Alignment:
    g, c = _typed(gt), _typed(cand)
    used: set[int] = set()
    cols = []
    for j, key in enumerate(g.header_keys):
        for k, ckey in enumerate(c.header_keys):
            if k not in used and ckey == key:
                cols.append(Pair(j, k, STRICT, 1.0))
                used.add(k)
                break
    base = Alignment((g.table.n_rows, g.table.n_cols), (c.table.n_rows, c.table.n_cols), tuple(cols))
    if not cols:
        return base
    candidates = []
    for i, grow in enumerate(g.keys):
        for r, crow in enumerate(c.keys):
            hits = sum(grow[p.gt] == crow[p.cand] for p in cols)
            if hits > config.row_threshold * len(cols):
                candidates.append((-hits, i, r))
    candidates.sort()
    gt_used: set[int] = set()
    cand_used: set[int] = set()
    rows = []
    for neg, i, r in candidates:
        if i in gt_used or r in cand_used:
            continue
        rows.append(Pair(i, r, STRICT, -neg / len(cols)))
        gt_used.add(i)
        cand_used.add(r)
    return base.with_pairs(rows=rows)


# -- similarity stage ---------------------------------------------------------------


def max_weight_matching(scores: np.ndarray, threshold: float = 0.0) -> list[tuple[int, int]]:
    """Maximum-weight one-to-one matching over entries ``>= threshold``.

    Equal-weight alternatives resolve toward lower row, then lower column
    indices.
    """
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        return []
    n, m = s.shape
    eligible = s >= threshold
    w = np.where(eligible, s, 0.0)
    order = np.arange(n)[:, None] * m + np.arange(m)[None, :]
    w = w - _TIE_EPS * order / (n * m)
    rows, cols = linear_sum_assignment(w, maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if eligible[i, j]]


def _header_similarity(a: str, b: str) -> float:
    """Dice overlap of header tokens where an abbreviation matches its expansion."""
    ta = [t.rstrip(".") for t in header_key(a).replace("(", " ").replace(")", " ").split()]
    tb = [t.rstrip(".") for t in header_key(b).replace("(", " ").replace(")", " ").split()]
    ta = [t for t in ta if t]
    tb = [t for t in tb if t]
    if not ta or not tb:
        return 0.0
    free = list(tb)
    hits = 0
    for t in ta:
        for k, u in enumerate(free):
            short, long_ = sorted((t, u), key=len)
            if t == u or (len(short) >= 2 and long_.startswith(short)) or lcs_ratio(t, u) >= 0.8:
                hits += 1
                del free[k]
                break
    dice = 2.0 * hits / (len(ta) + len(tb))
    return max(dice, lcs_ratio(header_key(a), header_key(b)))


def cell_similarity(g: TypedTable, c: TypedTable, i: int, j: int, r: int, k: int) -> float:
    if g.keys[i][j] == c.keys[r][k]:
        return 1.0
    return lcs_ratio(g.texts[i][j], c.texts[r][k])


def _column_content(g: TypedTable, c: TypedTable, j: int, k: int, row_map) -> float:
    if row_map:
        return sum(cell_similarity(g, c, p.gt, j, p.cand, k) for p in row_map) / len(row_map)
    a = Counter(row[j] for row in g.keys)
    b = Counter(row[k] for row in c.keys)
    total = sum(a.values()) + sum(b.values())
    if total == 0:
        return 0.0
    return 2.0 * sum((a & b).values()) / total


def column_similarity(g, c, a: Alignment, config: AlignConfig = AlignConfig()) -> SimilarityMatrix:
    g, c = _typed(g), _typed(c)
    us, vs = a.unmatched_gt_cols, a.unmatched_cand_cols
    s = np.zeros((len(us), len(vs)))
    hw = config.header_weight
    for x, j in enumerate(us):
        for y, k in enumerate(vs):
            s[x, y] = (hw * _header_similarity(g.table.headers[j], c.table.headers[k])
                       + (1 - hw) * _column_content(g, c, j, k, a.row_map))
    return SimilarityMatrix(np.clip(s, 0.0, 1.0), "columns", us, vs)


def row_similarity(g, c, a: Alignment) -> SimilarityMatrix:
    g, c = _typed(g), _typed(c)
    us, vs = a.unmatched_gt_rows, a.unmatched_cand_rows
    s = np.zeros((len(us), len(vs)))
    if a.column_map:
        for x, i in enumerate(us):
            for y, r in enumerate(vs):
                s[x, y] = sum(cell_similarity(g, c, i, p.gt, r, p.cand)
                              for p in a.column_map) / len(a.column_map)
    return SimilarityMatrix(np.clip(s, 0.0, 1.0), "rows", us, vs)


def _relaxed_pairs(m: SimilarityMatrix, tau: float) -> list[Pair]:
    return [Pair(m.gt_index[x], m.cand_index[y], RELAXED, float(m.scores[x, y]))
            for x, y in max_weight_matching(m.scores, tau)]


def similarity_align(gt, cand, base: Alignment, config: AlignConfig = AlignConfig()) -> Alignment:
    g, c = _typed(gt), _typed(cand)
    a = base
    if a.unmatched_gt_cols and a.unmatched_cand_cols:
        a = a.with_pairs(columns=_relaxed_pairs(column_similarity(g, c, a, config), config.tau_relax))
    added_rows = []
    if a.unmatched_gt_rows and a.unmatched_cand_rows:
        added_rows = _relaxed_pairs(row_similarity(g, c, a), config.tau_relax)
        a = a.with_pairs(rows=added_rows)
    if added_rows and a.unmatched_gt_cols and a.unmatched_cand_cols:
        a = a.with_pairs(columns=_relaxed_pairs(column_similarity(g, c, a, config), config.tau_relax))
    return a


def matched_cells(g: TypedTable, c: TypedTable, a: Alignment) -> int:
    return sum(g.keys[r.gt][p.gt] == c.keys[r.cand][p.cand]
               for r in a.row_map for p in a.column_map)


def _deterministic(g: TypedTable, c: TypedTable, config: AlignConfig) -> Alignment:
    return similarity_align(g, c, exact_align(g, c, config), config)


def detect_transpose(gt: Table, cand: Table, config: AlignConfig = AlignConfig()) -> bool:
    return _orient(TypedTable(gt), cand, config)[2]


def _orient(g: TypedTable, cand: Table, config: AlignConfig):
    c = TypedTable(cand)
    a = _deterministic(g, c, config)
    if not cand.is_flat:
        return a, c, False
    ct = TypedTable(transpose(cand))
    at = _deterministic(g, ct, config)
    if matched_cells(g, ct, at) > matched_cells(g, c, a):
        return at, ct, True
    return a, c, False


def align(gt: Table, cand: Table, config: AlignConfig = AlignConfig()):
    """Deterministic pipeline: orientation, exact, similarity.

    Returns ``(alignment, typed_gt, typed_oriented_candidate)``; alignment
    indices refer to the oriented candidate.
    """
    g = TypedTable(gt)
    a, c, flipped = _orient(g, cand, config)
    if flipped:
        a = Alignment(a.gt_shape, a.cand_shape, a.column_map, a.row_map, True)
    return a, g, c


# -- LLM stage -------------------------------------------------------------------------


def _resolve(ref, labels: list[str], n: int) -> Optional[int]:
    if isinstance(ref, bool):
        return None
    if isinstance(ref, int):
        return ref if 0 <= ref < n else None
    if isinstance(ref, str):
        if ref in labels:
            return labels.index(ref)
        key = header_key(ref)
        for j, lab in enumerate(labels):
            if header_key(lab) == key:
                return j
        if ref.strip().isdigit():
            idx = int(ref.strip())
            return idx if 0 <= idx < n else None
    return None


def apply_proposals(gt: Table, cand: Table, base: Alignment, proposals) -> Alignment:
    """Add proposed pairs that keep the alignment injective; strict pairs always win."""
    col_gt = {p.gt for p in base.column_map}
    col_cand = {p.cand for p in base.column_map}
    row_gt = {p.gt for p in base.row_map}
    row_cand = {p.cand for p in base.row_map}
    new_cols, new_rows = [], []
    for prop in proposals:
        if prop.axis == "column":
            j = _resolve(prop.gt, gt.headers, gt.n_cols)
            k = _resolve(prop.cand, cand.headers, cand.n_cols)
            taken_g, taken_c, out = col_gt, col_cand, new_cols
        elif prop.axis == "row":
            j = _resolve(prop.gt, [], gt.n_rows)
            k = _resolve(prop.cand, [], cand.n_rows)
            taken_g, taken_c, out = row_gt, row_cand, new_rows
        else:
            log.info("discarding proposal with unknown axis %r", prop.axis)
            continue
        if j is None or k is None:
            log.info("discarding unresolvable proposal %r", prop)
            continue
        if j in taken_g or k in taken_c:
            log.info("discarding proposal %r: index already aligned", prop)
            continue
        taken_g.add(j)
        taken_c.add(k)
        out.append(Pair(j, k, RELAXED, None))
    return base.with_pairs(columns=new_cols, rows=new_rows)


def refine_with_llm(gt: Table, cand: Table, base: Alignment, client: "LlmClient") -> Alignment:
    """Ask the model for extra relaxed pairs among unmatched rows/columns.

    Provider failures propagate (callers fall back to ``base``); malformed
    response segments are skipped.
    """
    from .llm import ALIGN_REFINE, parse_alignment_response, render_prompt

    if not (base.unmatched_gt_cols and base.unmatched_cand_cols) and not (
            base.unmatched_gt_rows and base.unmatched_cand_rows):
        return base
    prompt = render_prompt(ALIGN_REFINE, gt_table=gt, cand_table=cand, partial_alignment=base)
    raw = client.complete(prompt, template_id=ALIGN_REFINE.id)
    parsed = parse_alignment_response(raw)
    for problem in parsed.diagnostics:
        log.warning("alignment response: %s", problem)
    return apply_proposals(gt, cand, base, parsed.items)
