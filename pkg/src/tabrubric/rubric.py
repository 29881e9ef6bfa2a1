"""Rubric descriptors and the weighted error score.

The error score is

    sum over I in {missing, extra}:  beta_I * sum_E alpha_E * f[I][E] / N[E]
  + sum over partial cells p:        beta_partial * alpha_cell / N[cell] * gamma(p)

with gamma(p) = omega_p * |GT - Ref| / |Ref|. Missing/extra terms carry
gamma = 1. Arithmetic is done in Decimal so weights such as 0.9 and 0.4
multiply exactly.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Iterable, Mapping, Optional, Sequence, Union

from .align import Alignment
from .columns import TypedTable, majority_type
from .compare import (
    EXACT, EXTRA_VALUE, MISMATCH, MISSING_VALUE, PARTIAL, Comparison, ComparisonTuple,
)
from .values import TYPE_TAGS

MISSING, EXTRA, PARTIAL_INFO = "missing", "extra", "partial"
INFO_TYPES = (MISSING, EXTRA, PARTIAL_INFO)
ROW, COLUMN, CELL = "row", "column", "cell"
ENTITIES = (ROW, COLUMN, CELL)
SWEEP_DIMS = ("beta_missing", "beta_extra", "beta_partial", "alpha_row", "alpha_column", "alpha_cell")

Num = Union[int, float, str, Decimal]


class RubricError(ValueError):
    pass


class ZeroDenominator(RubricError):
    pass


class InconsistentInputs(RubricError):
    pass


def dec(x: Num) -> Decimal:
    """Decimal from the shortest float repr, so 0.4 means 0.4."""
    if isinstance(x, Decimal):
        return x
    if isinstance(x, float):
        return Decimal(repr(x))
    return Decimal(str(x))


@dataclass(frozen=True)
class WeightConfig:
    beta_missing: Decimal = Decimal("1")
    beta_extra: Decimal = Decimal("0.9")
    beta_partial: Decimal = Decimal("0.8")
    alpha_row: Decimal = Decimal("0.9")
    alpha_column: Decimal = Decimal("1")
    alpha_cell: Decimal = Decimal("0.8")
    omega_p: Decimal = Decimal("0.9")

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            v = dec(getattr(self, name))
            if not v.is_finite() or v < 0:
                raise RubricError(f"weight {name} must be finite and non-negative, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def paper_default(cls) -> "WeightConfig":
        return cls()

    @property
    def beta(self) -> dict[str, Decimal]:
        return {MISSING: self.beta_missing, EXTRA: self.beta_extra, PARTIAL_INFO: self.beta_partial}

    @property
    def alpha(self) -> dict[str, Decimal]:
        return {ROW: self.alpha_row, COLUMN: self.alpha_column, CELL: self.alpha_cell}

    def to_dict(self) -> dict:
        return {name: str(getattr(self, name)) for name in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: Mapping[str, Num]) -> "WeightConfig":
        return cls(**{k: dec(v) for k, v in d.items()})


PROFILES = {"paper-default": WeightConfig.paper_default()}

_ALIASES = {
    "beta.missing": "beta_missing", "beta.extra": "beta_extra", "beta.partial": "beta_partial",
    "alpha.row": "alpha_row", "alpha.column": "alpha_column", "alpha.col": "alpha_column",
    "alpha_col": "alpha_column", "alpha.cell": "alpha_cell", "omega": "omega_p",
    "omega.p": "omega_p",
}


def parse_weights(text: str) -> WeightConfig:
    """Read ``key = value`` lines; ``profile = <name>`` picks the base profile."""
    base = WeightConfig.paper_default()
    updates: dict[str, Decimal] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else (":" if ":" in line else None)
        if sep is None:
            raise RubricError(f"weights line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split(sep, 1))
        key = key.lower()
        if key == "profile":
            if value not in PROFILES:
                raise RubricError(f"weights line {lineno}: unknown profile {value!r}")
            base = PROFILES[value]
            continue
        key = _ALIASES.get(key, key)
        if key not in WeightConfig.__dataclass_fields__:
            raise RubricError(f"weights line {lineno}: unknown weight {key!r}")
        try:
            updates[key] = Decimal(value)
        except ArithmeticError:
            raise RubricError(f"weights line {lineno}: bad number {value!r}") from None
    return replace(base, **updates)


def load_weights(path: str) -> WeightConfig:
    if path in PROFILES:
        return PROFILES[path]
    with open(path, encoding="utf-8") as fh:
        return parse_weights(fh.read())


@dataclass
class RubricCounts:
    f: dict = field(default_factory=dict)  # (info, entity) -> count
    n_rows: int = 0
    n_cols: int = 0

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def n(self, entity: str) -> int:
        return {ROW: self.n_rows, COLUMN: self.n_cols, CELL: self.n_cells}[entity]

    def get(self, info: str, entity: str) -> int:
        return self.f.get((info, entity), 0)

    def is_clean(self) -> bool:
        return all(v == 0 for v in self.f.values())

    def to_dict(self) -> dict:
        return {
            "f": {info: {e: self.get(info, e) for e in ENTITIES} for info in INFO_TYPES},
            "N": {ROW: self.n_rows, COLUMN: self.n_cols, CELL: self.n_cells},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RubricCounts":
        f = {(info, e): int(v) for info, row in d["f"].items() for e, v in row.items() if int(v)}
        return cls(f, int(d["N"][ROW]), int(d["N"][COLUMN]))


def compute_gamma(magnitude: Optional[Num], w: WeightConfig) -> Decimal:
    """1 without a partial cell, otherwise omega_p times the normalized difference."""
    if magnitude is None:
        return Decimal(1)
    return w.omega_p * dec(magnitude)


def score_terms(counts: RubricCounts, partials: Sequence[Num], w: WeightConfig) -> dict:
    """Per-term contributions; their sum is the error score."""
    terms: dict = {}
    for info in (MISSING, EXTRA):
        for e in ENTITIES:
            f = counts.get(info, e)
            if f == 0:
                continue
            n = counts.n(e)
            if n == 0:
                raise ZeroDenominator(f"{info} {e} count {f} with zero ground-truth {e}s")
            terms[(info, e)] = w.beta[info] * w.alpha[e] * f / n
    if partials:
        if counts.n_cells == 0:
            raise ZeroDenominator("partial cells with zero ground-truth cells")
        total = Decimal(0)
        for m in partials:
            total += w.beta_partial * w.alpha_cell / counts.n_cells * compute_gamma(m, w)
        terms[(PARTIAL_INFO, CELL)] = total
    return terms


def compute_score(counts: RubricCounts, partials: Sequence[Num], w: WeightConfig) -> Decimal:
    return sum(score_terms(counts, partials, w).values(), Decimal(0))


def quality(score: Decimal) -> Decimal:
    """Bounded companion value 1/(1+error); not part of the rubric itself."""
    return 1 / (1 + score)


@dataclass
class RubricReport:
    structure_descriptor: dict
    column_descriptor: list
    cell_descriptor: dict
    granular_differences: list
    counts: RubricCounts
    partial_magnitudes: list
    alignment: dict
    weights: Optional[WeightConfig] = None
    score: Optional[Decimal] = None

    def scored(self, w: WeightConfig) -> "RubricReport":
        return replace(self, weights=w, score=compute_score(self.counts, self.partial_magnitudes, w))

    def to_dict(self) -> dict:
        d = {
            "structure_descriptor": self.structure_descriptor,
            "column_descriptor": self.column_descriptor,
            "cell_descriptor": self.cell_descriptor,
            "granular_differences": self.granular_differences,
            "counts": self.counts.to_dict(),
            "partial_magnitudes": list(self.partial_magnitudes),
            "alignment": self.alignment,
            "weights": self.weights.to_dict() if self.weights else None,
        }
        if self.score is not None:
            d["score"] = float(self.score)
            d["score_decimal"] = str(self.score)
            d["normalized_quality_non_paper"] = float(quality(self.score))
            d["terms"] = {f"{i}.{e}": str(v) for (i, e), v in
                          score_terms(self.counts, self.partial_magnitudes, self.weights).items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RubricReport":
        w = WeightConfig.from_dict(d["weights"]) if d.get("weights") else None
        score = Decimal(d["score_decimal"]) if "score_decimal" in d else None
        return cls(d["structure_descriptor"], d["column_descriptor"], d["cell_descriptor"],
                   d["granular_differences"], RubricCounts.from_dict(d["counts"]),
                   list(d["partial_magnitudes"]), d["alignment"], w, score)


def _is_partial(t: ComparisonTuple) -> bool:
    return t.classification == PARTIAL or (t.classification == MISMATCH and not t.is_blank_mismatch)


def _partial_magnitude(t: ComparisonTuple) -> float:
    # a type/unit clash has no measurable distance; it counts as a full difference
    return t.magnitude if t.classification == PARTIAL else 1.0


def build_rubric(gt: TypedTable, cand: TypedTable, a: Alignment, comparison: Comparison) -> RubricReport:
    """Populate the four descriptors (unscored)."""
    tuples, res = comparison.tuples, comparison.residue
    if (sorted(res.missing_rows) != a.unmatched_gt_rows or sorted(res.missing_cols) != a.unmatched_gt_cols
            or len(tuples) != len(a.row_map) * len(a.column_map)):
        raise InconsistentInputs("comparison does not belong to this alignment")
    n_rows, n_cols = gt.table.n_rows, gt.table.n_cols
    if a.gt_shape != (n_rows, n_cols):
        raise InconsistentInputs("alignment shape does not match the ground-truth table")

    by_cell = {(t.gt_row, t.gt_col): t for t in tuples}
    partial_tuples = [t for t in tuples if _is_partial(t)]
    missing_vals = sum(t.note == MISSING_VALUE for t in tuples)
    extra_vals = sum(t.note == EXTRA_VALUE for t in tuples)

    f = {
        (MISSING, ROW): len(res.missing_rows), (MISSING, COLUMN): len(res.missing_cols),
        (MISSING, CELL): missing_vals,
        (EXTRA, ROW): len(res.extra_rows), (EXTRA, COLUMN): len(res.extra_cols),
        (EXTRA, CELL): extra_vals,
        (PARTIAL_INFO, CELL): len(partial_tuples),
    }
    counts = RubricCounts({k: v for k, v in f.items() if v}, n_rows, n_cols)

    exact_rows = sum(
        1 for rp in a.row_map
        if a.column_map and all(by_cell[(rp.gt, cp.gt)].classification == EXACT for cp in a.column_map))
    exact_cols = sum(
        1 for cp in a.column_map
        if all(by_cell[(rp.gt, cp.gt)].classification == EXACT for rp in a.row_map))
    exact_cells = sum(t.classification == EXACT for t in tuples)
    structure = res.to_dict()
    structure["exact"] = {"rows": exact_rows, "columns": exact_cols, "cells": exact_cells}
    structure["cell_level"] = {"missing_values": missing_vals, "extra_values": extra_vals,
                               "partial": len(partial_tuples)}

    # column descriptor
    col_of_gt = {p.gt: p for p in a.column_map}
    columns = []
    for j in range(n_cols):
        gt_type = majority_type([row[j] for row in gt.values])
        entry = {"side": "gt", "index": j, "header": gt.table.headers[j], "data_type": gt_type}
        p = col_of_gt.get(j)
        if p is None:
            entry.update(status="missing", cand_index=None, strictness=None,
                         missing_cells=n_rows, extra_cells=0)
        else:
            col_tuples = [by_cell[(rp.gt, j)] for rp in a.row_map]
            entry.update(
                status="matched", cand_index=p.cand, strictness=p.strictness,
                exact=sum(t.classification == EXACT for t in col_tuples),
                partial=sum(_is_partial(t) for t in col_tuples),
                missing_values=sum(t.note == MISSING_VALUE for t in col_tuples),
                extra_values=sum(t.note == EXTRA_VALUE for t in col_tuples),
                missing_cells=len(res.missing_rows), extra_cells=len(res.extra_rows),
            )
        columns.append(entry)
    for k in res.extra_cols:
        columns.append({"side": "cand", "index": k, "header": cand.table.headers[k],
                        "data_type": majority_type([row[k] for row in cand.values]),
                        "status": "extra", "extra_cells": cand.table.n_rows})

    # cell descriptor: per-type MI / EI / partial / exact counts
    breakdown = {tag: {"EM": 0, "partial": 0, "MI": 0, "EI": 0} for tag in TYPE_TAGS}
    for t in tuples:
        if t.classification == EXACT:
            breakdown[t.data_type]["EM"] += 1
        elif t.note == MISSING_VALUE:
            breakdown[t.data_type]["MI"] += 1
        elif t.note == EXTRA_VALUE:
            breakdown[t.data_type]["EI"] += 1
        else:
            breakdown[t.data_type]["partial"] += 1
    miss_rows, miss_cols = set(res.missing_rows), set(res.missing_cols)
    for i in range(n_rows):
        for j in range(n_cols):
            if i in miss_rows or j in miss_cols:
                breakdown[gt.types[j]]["MI"] += 1
    ex_rows, ex_cols = set(res.extra_rows), set(res.extra_cols)
    for i in range(cand.table.n_rows):
        for k in range(cand.table.n_cols):
            if i in ex_rows or k in ex_cols:
                breakdown[cand.types[k]]["EI"] += 1
    by_class = Counter((t.data_type, t.classification) for t in tuples)
    cell = {
        "by_type": breakdown,
        "by_classification": {tag: {c: by_class.get((tag, c), 0) for c in (EXACT, PARTIAL, MISMATCH)}
                              for tag in TYPE_TAGS},
    }

    granular = []
    for t in partial_tuples:
        granular.append({
            "gt_row": t.gt_row, "gt_col": t.gt_col, "cand_row": t.cand_row, "cand_col": t.cand_col,
            "data_type": t.data_type, "classification": t.classification,
            "magnitude": _partial_magnitude(t),
            "gt_unit": t.gt_unit.symbol if t.gt_unit else None,
            "cand_unit": t.cand_unit.symbol if t.cand_unit else None,
            "note": t.note,
        })
    return RubricReport(structure, columns, cell, granular, counts,
                        [_partial_magnitude(t) for t in partial_tuples], a.to_dict())


def recompute_score(report: dict) -> Decimal:
    """Score of a serialized report from its counts, magnitudes and weights alone."""
    return compute_score(RubricCounts.from_dict(report["counts"]), report["partial_magnitudes"],
                         WeightConfig.from_dict(report["weights"]))


# -- aggregation ------------------------------------------------------------------------


@dataclass
class AggregateStats:
    n_reports: int
    by_type: dict    # tag -> {"EI","MI","partial"} mean per table
    structure: dict  # "row"/"column" -> {"MI","EI","EM"} mean per table

    def to_dict(self) -> dict:
        return {"n_reports": self.n_reports, "by_type": self.by_type, "structure": self.structure}


def aggregate_stats(reports: Iterable[Union[RubricReport, dict]]) -> AggregateStats:
    items = [r.to_dict() if isinstance(r, RubricReport) else r for r in reports]
    if not items:
        raise RubricError("aggregate_stats needs at least one report")
    n = len(items)
    by_type = {tag: {"EI": 0.0, "MI": 0.0, "partial": 0.0} for tag in TYPE_TAGS}
    structure = {ROW: {"MI": 0.0, "EI": 0.0, "EM": 0.0}, COLUMN: {"MI": 0.0, "EI": 0.0, "EM": 0.0}}
    for r in items:
        for tag, row in r["cell_descriptor"]["by_type"].items():
            for key in ("EI", "MI", "partial"):
                by_type[tag][key] += row[key]
        s = r["structure_descriptor"]
        structure[ROW]["MI"] += s["missing"]["rows"]
        structure[ROW]["EI"] += s["extra"]["rows"]
        structure[ROW]["EM"] += s["exact"]["rows"]
        structure[COLUMN]["MI"] += s["missing"]["columns"]
        structure[COLUMN]["EI"] += s["extra"]["columns"]
        structure[COLUMN]["EM"] += s["exact"]["columns"]
    for table in (by_type, structure):
        for row in table.values():
            for key in row:
                row[key] /= n
    return AggregateStats(n, by_type, structure)


# -- sweeps -----------------------------------------------------------------------------------


def sweep_weights(base: WeightConfig, low: Num) -> list[WeightConfig]:
    """All 64 configurations setting each beta/alpha to ``low`` or 1; omega_p kept."""
    lo = dec(low)
    if not Decimal(0) <= lo < Decimal(1):
        raise RubricError("low must lie in [0, 1)")
    out = []
    for combo in itertools.product((lo, Decimal(1)), repeat=len(SWEEP_DIMS)):
        out.append(replace(base, **dict(zip(SWEEP_DIMS, combo))))
    return out
