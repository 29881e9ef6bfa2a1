"""Per-column typing shared by the aligner and the comparator."""

from __future__ import annotations

from collections import Counter
from typing import Optional

from .similarity import norm_text
from .table import Table
from .values import (
    TYPE_TAGS, TEXT, CellValue, ListValue, Number, Unit, apply_default_unit, header_unit,
    infer_cell_type, normalize_value,
)


def header_key(label: str) -> str:
    return norm_text(label.replace("_", " "))


def majority_type(values: list[CellValue]) -> str:
    """Most frequent variant among non-empty cells; ties go to the earlier tag."""
    counts = Counter(v.tag for v in values if not (v.tag == TEXT and v.text == ""))
    if not counts:
        return TEXT
    best = max(counts.values())
    return next(tag for tag in TYPE_TAGS if counts.get(tag) == best)


class TypedTable:
    """A table with every cell inferred under its column's header unit and majority type."""

    def __init__(self, table: Table):
        self.table = table
        self.units: list[Optional[Unit]] = [header_unit(h) for h in table.headers]
        self.types: list[str] = []
        self.values: list[list[CellValue]] = [[None] * table.n_cols for _ in range(table.n_rows)]
        for j in range(table.n_cols):
            plain = [c.value for c in table.column(j)]
            hint = majority_type(plain)
            self.types.append(hint)
            for i, cell in enumerate(table.column(j)):
                v = infer_cell_type(cell.raw, hint)
                self.values[i][j] = apply_default_unit(v, self.units[j])
        self.norm = [[normalize_value(v) for v in row] for row in self.values]
        self.keys = [[value_key(v) for v in row] for row in self.norm]
        self.texts = [[norm_text(c.raw) for c in row] for row in table.rows]
        self.header_keys = [header_key(h) for h in table.headers]


def value_key(v: CellValue) -> str:
    """Canonical text of a normalized value.

    Numbers keep 10 significant digits, in line with the comparator's
    relative tolerance, so rescaled renderings still key alike.
    """
    if isinstance(v, ListValue) and len(v.items) == 1:
        return value_key(v.items[0])
    if isinstance(v, Number):
        base = v.unit.base if v.unit else ""
        return f"number:{float(f'{v.magnitude:.10g}')!r}:{base}"
    return repr(v)
