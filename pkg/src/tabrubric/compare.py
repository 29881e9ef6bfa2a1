"""Typed comparison of aligned cells into comparison tuples."""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Optional

from .align import Alignment
from .columns import TypedTable, value_key
from .similarity import lcs_ratio
from .table import Cell, Table
from .values import (
    DATE, NUMBER, TEXT, TIME, Boolean, CellValue, Date, ListValue, Number, Other, Text, Time,
    Unit, apply_default_unit, infer_cell_type, normalize_value, value_from_json, value_to_json,
)

if TYPE_CHECKING:
    from .llm import LlmClient

log = logging.getLogger(__name__)

EXACT = "exact"
PARTIAL = "partial"
MISMATCH = "mismatch"
CLASSIFICATIONS = (EXACT, PARTIAL, MISMATCH)

EPS_NUM = 1e-9

# notes attached to mismatch tuples that are really one-sided blanks
MISSING_VALUE = "missing-value"
EXTRA_VALUE = "extra-value"
ZERO_REFERENCE = "zero-reference"


class DivisionByZeroRef(ArithmeticError):
    """The candidate value is zero in base units; ``absolute`` holds |GT-Ref|."""

    def __init__(self, absolute: float):
        self.absolute = absolute
        super().__init__(f"reference value is zero (absolute difference {absolute})")


class InconsistentAlignment(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonTuple:
    gt_row: int
    gt_col: int
    cand_row: int
    cand_col: int
    data_type: str
    gt_value: CellValue
    cand_value: CellValue
    gt_unit: Optional[Unit]
    cand_unit: Optional[Unit]
    classification: str
    magnitude: Optional[float] = None
    note: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "gt_row": self.gt_row, "gt_col": self.gt_col,
            "cand_row": self.cand_row, "cand_col": self.cand_col,
            "data_type": self.data_type,
            "gt_value": value_to_json(self.gt_value),
            "cand_value": value_to_json(self.cand_value),
            "gt_unit": self.gt_unit.to_dict() if self.gt_unit else None,
            "cand_unit": self.cand_unit.to_dict() if self.cand_unit else None,
            "classification": self.classification,
            "magnitude": self.magnitude,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonTuple":
        return cls(d["gt_row"], d["gt_col"], d["cand_row"], d["cand_col"], d["data_type"],
                   value_from_json(d["gt_value"]), value_from_json(d["cand_value"]),
                   Unit.from_dict(d.get("gt_unit")), Unit.from_dict(d.get("cand_unit")),
                   d["classification"], d.get("magnitude"), d.get("note"))

    @property
    def is_blank_mismatch(self) -> bool:
        return self.note in (MISSING_VALUE, EXTRA_VALUE)


def tuple_violations(t: ComparisonTuple) -> list[str]:
    """Invariant gate applied to every tuple, including model-proposed ones."""
    problems = []
    if t.classification not in CLASSIFICATIONS:
        problems.append(f"unknown classification {t.classification!r}")
    m = t.magnitude
    if m is not None and (not isinstance(m, (int, float)) or not math.isfinite(m) or m < 0):
        problems.append(f"magnitude must be finite and non-negative, got {m!r}")
        return problems
    if t.classification == EXACT and m not in (None, 0, 0.0):
        problems.append("exact tuple with non-zero magnitude")
    if t.classification == PARTIAL and t.data_type in (NUMBER, DATE, TIME) and not (m and m > 0):
        problems.append("partial numeric/date/time tuple needs a positive magnitude")
    if (t.gt_unit is not None and t.cand_unit is not None
            and t.gt_unit.base != t.cand_unit.base and t.classification != MISMATCH):
        problems.append("incompatible units must be classified as mismatch")
    return problems


# -- magnitudes ------------------------------------------------------------------------


def _date_basis(gt: dt.date, ref: dt.date) -> int:
    if gt.year == ref.year and gt.month == ref.month:
        return ref.day
    if gt.year == ref.year:
        return ref.timetuple().tm_yday
    return ref.toordinal()


def compute_magnitude(gt: CellValue, cand: CellValue) -> float:
    """Normalized difference |GT - Ref| / |Ref| between two same-kind values.

    Numbers compare in their common base unit. Dates measure the day gap
    against the Ref date's position inside the smallest calendar period
    holding both dates (day of month, day of year, else the proleptic
    ordinal). Clock times use seconds. Text uses 1 - LCS ratio, lists the
    Jaccard distance, booleans 0/1.

    Raises DivisionByZeroRef when Ref is zero in its basis.
    """
    gt, cand = normalize_value(gt), normalize_value(cand)
    if isinstance(gt, Number) and isinstance(cand, Number):
        diff = abs(gt.magnitude - cand.magnitude)
        if cand.magnitude == 0:
            if diff == 0:
                return 0.0
            raise DivisionByZeroRef(diff)
        return diff / abs(cand.magnitude)
    if isinstance(gt, Date) and isinstance(cand, Date):
        return abs((gt.value - cand.value).days) / _date_basis(gt.value, cand.value)
    if isinstance(gt, Time) and isinstance(cand, Time):
        diff = abs(gt.seconds - cand.seconds)
        if cand.seconds == 0:
            if diff == 0:
                return 0.0
            raise DivisionByZeroRef(diff)
        return diff / abs(cand.seconds)
    if isinstance(gt, (Text, Other)) and isinstance(cand, (Text, Other)):
        a = gt.text if isinstance(gt, Text) else gt.raw
        b = cand.text if isinstance(cand, Text) else cand.raw
        return 1.0 - lcs_ratio(a, b)
    if isinstance(gt, ListValue) and isinstance(cand, ListValue):
        a = {value_key(v) for v in gt.items}
        b = {value_key(v) for v in cand.items}
        union = a | b
        return 0.0 if not union else 1.0 - len(a & b) / len(union)
    if isinstance(gt, Boolean) and isinstance(cand, Boolean):
        return 0.0 if gt.value == cand.value else 1.0
    raise TypeError(f"no magnitude between {gt.tag} and {cand.tag}")


# -- cell comparison ------------------------------------------------------------------------


def _is_blank(v: CellValue) -> bool:
    return isinstance(v, Text) and v.text.strip() == ""


def _numbers_equal(a: float, b: float) -> bool:
    return abs(a - b) <= EPS_NUM * max(abs(a), abs(b))


def _adopt_unit(g: Number, c: Number) -> tuple[Number, Number, Optional[str]]:
    # a bare number next to a dimensional one is read in the same unit as written
    if g.unit is None and c.unit is not None and c.unit.base:
        return Number(g.magnitude, c.unit), c, "unit-assumed"
    if c.unit is None and g.unit is not None and g.unit.base:
        return g, Number(c.magnitude, g.unit), "unit-assumed"
    return g, c, None


def _unwrap(v: CellValue) -> CellValue:
    return v.items[0] if isinstance(v, ListValue) and len(v.items) == 1 else v


def compare_values(gv: CellValue, cv: CellValue, col_type: Optional[str] = None,
                   at: tuple = (0, 0, 0, 0)) -> ComparisonTuple:
    """Classify two typed (header-unit applied) values as exact, partial or mismatch."""
    gi, gj, ci, cj = at
    # a one-item list under a list-typed column is just its scalar
    if isinstance(gv, ListValue) != isinstance(cv, ListValue):
        gv, cv = _unwrap(gv), _unwrap(cv)
    data_type = gv.tag if not _is_blank(gv) else (cv.tag if not _is_blank(cv) else (col_type or TEXT))
    gu = gv.unit if isinstance(gv, Number) else None
    cu = cv.unit if isinstance(cv, Number) else None

    def make(cls: str, mag: Optional[float] = None, note: Optional[str] = None) -> ComparisonTuple:
        return ComparisonTuple(gi, gj, ci, cj, data_type, gv, cv, gu, cu, cls, mag, note)

    if _is_blank(gv) and _is_blank(cv):
        return make(EXACT, 0.0)
    if _is_blank(cv):
        return make(MISMATCH, None, MISSING_VALUE)
    if _is_blank(gv):
        return make(MISMATCH, None, EXTRA_VALUE)

    if isinstance(gv, Number) and isinstance(cv, Number):
        g, c, note = _adopt_unit(gv, cv)
        if (g.unit.base if g.unit else "") != (c.unit.base if c.unit else ""):
            return make(MISMATCH, None, "incompatible-units")
        a, b = normalize_value(g).magnitude, normalize_value(c).magnitude
        if _numbers_equal(a, b):
            return make(EXACT, 0.0, note)
        try:
            return make(PARTIAL, compute_magnitude(g, c), note)
        except DivisionByZeroRef as e:
            return make(PARTIAL, e.absolute, ZERO_REFERENCE)

    textual = (Text, Other)
    same_kind = type(gv) is type(cv) or (isinstance(gv, textual) and isinstance(cv, textual))
    if not same_kind:
        return make(MISMATCH, None, "type-mismatch")
    if value_key(normalize_value(gv)) == value_key(normalize_value(cv)):
        return make(EXACT, 0.0)
    if isinstance(gv, ListValue):
        a = {value_key(normalize_value(v)) for v in gv.items}
        b = {value_key(normalize_value(v)) for v in cv.items}
        if a == b:
            return make(EXACT, 0.0)
    try:
        mag = compute_magnitude(gv, cv)
    except DivisionByZeroRef as e:
        return make(PARTIAL, e.absolute, ZERO_REFERENCE)
    if mag == 0:
        return make(EXACT, 0.0)
    return make(PARTIAL, mag)


def compare_cells(gt: Cell, cand: Cell, col_type: Optional[str] = None,
                  gt_unit: Optional[Unit] = None, cand_unit: Optional[Unit] = None,
                  at: tuple = (0, 0, 0, 0)) -> ComparisonTuple:
    """Compare two raw cells; ``gt_unit``/``cand_unit`` are column header units."""
    gv = apply_default_unit(infer_cell_type(gt.raw, col_type), gt_unit)
    cv = apply_default_unit(infer_cell_type(cand.raw, col_type), cand_unit)
    return compare_values(gv, cv, col_type, at)


# -- whole tables ------------------------------------------------------------------------------


@dataclass
class Residue:
    missing_rows: list = field(default_factory=list)
    missing_cols: list = field(default_factory=list)
    extra_rows: list = field(default_factory=list)
    extra_cols: list = field(default_factory=list)
    missing_cells: int = 0
    extra_cells: int = 0

    def to_dict(self) -> dict:
        return {
            "missing": {"rows": len(self.missing_rows), "columns": len(self.missing_cols),
                        "cells": self.missing_cells},
            "extra": {"rows": len(self.extra_rows), "columns": len(self.extra_cols),
                      "cells": self.extra_cells},
            "missing_row_indices": list(self.missing_rows),
            "missing_col_indices": list(self.missing_cols),
            "extra_row_indices": list(self.extra_rows),
            "extra_col_indices": list(self.extra_cols),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Residue":
        return cls(list(d["missing_row_indices"]), list(d["missing_col_indices"]),
                   list(d["extra_row_indices"]), list(d["extra_col_indices"]),
                   d["missing"]["cells"], d["extra"]["cells"])


def _uncovered(n_rows: int, n_cols: int, rows: list, cols: list) -> int:
    return len(rows) * n_cols + n_rows * len(cols) - len(rows) * len(cols)


@dataclass
class Comparison:
    tuples: list
    residue: Residue


def compare_aligned_tables(gt, cand, a: Alignment, client: Optional["LlmClient"] = None,
                           llm_strict: bool = False) -> Comparison:
    """One tuple per aligned cell plus the unmatched row/column residue.

    With a client, mismatches and text partials get a second opinion from the
    model; rejected or failed proposals leave the deterministic tuple in place.
    """
    g = gt if isinstance(gt, TypedTable) else TypedTable(gt)
    c = cand if isinstance(cand, TypedTable) else TypedTable(cand)
    if a.gt_shape != (g.table.n_rows, g.table.n_cols) or a.cand_shape != (c.table.n_rows, c.table.n_cols):
        raise InconsistentAlignment("alignment shapes do not match the tables")
    try:
        a.check()
    except ValueError as e:
        raise InconsistentAlignment(str(e)) from None

    tuples = []
    for rp in a.row_map:
        for cp in a.column_map:
            t = compare_values(g.values[rp.gt][cp.gt], c.values[rp.cand][cp.cand],
                               g.types[cp.gt], (rp.gt, cp.gt, rp.cand, cp.cand))
            if client is not None and (
                    (t.classification == MISMATCH and not t.is_blank_mismatch)
                    or (t.classification == PARTIAL and t.data_type == TEXT)):
                t = compare_cells_llm(
                    g.table.rows[rp.gt][cp.gt], c.table.rows[rp.cand][cp.cand], client,
                    deterministic=t, gt_header=g.table.headers[cp.gt],
                    cand_header=c.table.headers[cp.cand], strict=llm_strict)
            tuples.append(t)

    gr, gc = g.table.n_rows, g.table.n_cols
    cr, cc = c.table.n_rows, c.table.n_cols
    res = Residue(a.unmatched_gt_rows, a.unmatched_gt_cols, a.unmatched_cand_rows,
                  a.unmatched_cand_cols)
    res.missing_cells = _uncovered(gr, gc, res.missing_rows, res.missing_cols)
    res.extra_cells = _uncovered(cr, cc, res.extra_rows, res.extra_cols)
    return Comparison(tuples, res)


def compare_cells_llm(gt: Cell, cand: Cell, client: "LlmClient", deterministic: ComparisonTuple,
                      gt_header: str = "value", cand_header: str = "value",
                      strict: bool = False) -> ComparisonTuple:
    """Model second opinion on one cell pair, kept only if it passes the invariant gate."""
    from .llm import COMPARE_TUPLES, ProviderError, parse_tuple_response, render_prompt

    gt_t = Table.from_strings([gt_header], [[gt.raw]])
    cand_t = Table.from_strings([cand_header], [[cand.raw]])
    prompt = render_prompt(COMPARE_TUPLES, gt_table=gt_t, cand_table=cand_t, partial_alignment=None)
    try:
        raw = client.complete(prompt, template_id=COMPARE_TUPLES.id)
    except ProviderError:
        if strict:
            raise
        log.warning("provider error during cell comparison; keeping deterministic tuple")
        return deterministic
    parsed = parse_tuple_response(raw)
    for problem in parsed.diagnostics:
        log.warning("tuple response: %s", problem)
    for proposal in parsed.items:
        candidate = replace(
            deterministic,
            data_type=proposal.get("data_type") or deterministic.data_type,
            classification=proposal.get("classification"),
            magnitude=proposal.get("magnitude"),
            gt_unit=proposal.get("gt_unit", deterministic.gt_unit),
            cand_unit=proposal.get("cand_unit", deterministic.cand_unit),
            note="llm: " + (proposal.get("note") or "semantic judgement"),
        )
        problems = tuple_violations(candidate)
        if problems:
            log.info("rejected model tuple: %s", "; ".join(problems))
            continue
        return candidate
    return deterministic
