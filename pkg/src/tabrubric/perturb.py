"""Seeded, rule-based table corruptions with exact ground-truth labels.

Each case applies one perturbation kind to a clean table. The label records
what a perfect evaluator should report when the clean table is the ground
truth and the perturbed one is the candidate.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Optional, Sequence

import numpy as np

from .columns import TypedTable, header_key, value_key
from .compare import EXACT, compare_values
from .rubric import CELL, COLUMN, EXTRA, MISSING, PARTIAL_INFO, ROW, RubricCounts
from .similarity import lcs_ratio, norm_text
from .table import Table, canonical_serialize, flatten_hierarchical, parse_json, transpose
from .values import DATE, NUMBER, TEXT, UNITS, Date, ListValue, Number, Text, format_number, header_unit

EASY, MEDIUM, HARD = "Easy", "Medium", "Hard"
BANDS = (EASY, MEDIUM, HARD)

KINDS: dict[str, str] = {
    "typo-in-text": EASY,
    "header-rephrase": EASY,
    "date-format-change": EASY,
    "thousands-separator-toggle": EASY,
    "unit-rescale": EASY,
    "currency-symbol-normalize": EASY,
    "decimal-rounding": EASY,
    "header-reorder": MEDIUM,
    "small-numeric-shift": MEDIUM,
    "merge-two-rows": MEDIUM,
    "row-reorder": MEDIUM,
    "abbreviation-swap": MEDIUM,
    "drop-row": HARD,
    "drop-column": HARD,
    "add-spurious-column": HARD,
    "transpose-table": HARD,
}
# semantically a no-op: only the rendering changes
FORMATTING_KINDS = frozenset({
    "header-rephrase", "date-format-change", "thousands-separator-toggle",
    "unit-rescale", "currency-symbol-normalize",
})
STRUCTURAL_KINDS = frozenset({"drop-row", "drop-column", "add-spurious-column", "transpose-table"})
DEFAULT_MIX = {EASY: 0.44, MEDIUM: 0.34, HARD: 0.22}
BENCH_VERSION = "tabx-bench/1"


class PerturbError(ValueError):
    pass


class TargetOutOfRange(PerturbError):
    pass


class KindInapplicable(PerturbError):
    pass


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    seed: int = 0
    target: Optional[dict] = None
    params: dict = field(default_factory=dict)
    difficulty: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PerturbError(f"unknown perturbation kind {self.kind!r}")
        band = KINDS[self.kind]
        if self.difficulty is None:
            object.__setattr__(self, "difficulty", band)
        elif self.difficulty != band:
            raise PerturbError(f"{self.kind} belongs to band {band}, not {self.difficulty}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "difficulty": self.difficulty, "seed": self.seed,
                "target": self.target, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationSpec":
        return cls(d["kind"], int(d.get("seed", 0)), d.get("target"), dict(d.get("params") or {}),
                   d.get("difficulty"))


@dataclass
class BenchmarkCase:
    case_id: str
    table_id: str
    clean: Table
    perturbed: Table
    applied: list
    provenance: str = "synthetic"
    seed: int = 0

    @property
    def kinds(self) -> list[str]:
        return [s.kind for s in self.applied]

    @property
    def formatting_only(self) -> bool:
        return bool(self.applied) and all(s.kind in FORMATTING_KINDS for s in self.applied)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def case_seed(master: int, table_id: str, index: int) -> int:
    digest = hashlib.sha256(f"{master}\x1f{table_id}\x1f{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# -- helpers -----------------------------------------------------------------------------

_LITERAL = re.compile(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?")
_UNIT_PAREN = re.compile(r"^(?P<base>.*?)(?P<unit>\s*\([^()]*\))?\s*$")


def _rows(t: Table) -> list[list[str]]:
    return t.raw_rows()


def _rebuild(t: Table, headers: Sequence[str], rows: Sequence[Sequence[str]]) -> Table:
    return Table.from_strings(list(headers), [list(r) for r in rows], source_id=t.source_id)


def _choose(rng: np.random.Generator, items: Sequence):
    if not items:
        raise KindInapplicable("no eligible target")
    return items[int(rng.integers(len(items)))]


def _permutation(rng: np.random.Generator, n: int) -> list[int]:
    if n < 2:
        raise KindInapplicable("nothing to reorder")
    for _ in range(32):
        perm = [int(x) for x in rng.permutation(n)]
        if perm != list(range(n)):
            return perm
    return list(range(1, n)) + [0]


def _split_header(h: str) -> tuple[str, str]:
    m = _UNIT_PAREN.match(h)
    base, unit = m.group("base"), m.group("unit") or ""
    if unit and header_unit(h) is None:
        # a parenthetical that is not a unit belongs to the name
        return h, ""
    return base, unit


def _single_literal(raw: str) -> Optional[re.Match]:
    found = list(_LITERAL.finditer(raw))
    return found[0] if len(found) == 1 else None


def _render_decimal(d: Decimal, grouped: bool) -> str:
    return format(d, ",f") if grouped else format(d, "f")


def _cell_target(spec: PerturbationSpec, eligible: list[tuple[int, int]], rng) -> tuple[int, int]:
    if spec.target and "cell" in spec.target:
        i, j = spec.target["cell"]
        if (i, j) not in eligible:
            raise TargetOutOfRange(f"cell {(i, j)} is not eligible for {spec.kind}")
        return i, j
    return _choose(rng, eligible)


def _col_target(spec: PerturbationSpec, eligible: list[int], rng, n: int) -> int:
    if spec.target and "column" in spec.target:
        j = spec.target["column"]
        if not 0 <= j < n:
            raise TargetOutOfRange(f"column {j} out of range")
        if j not in eligible:
            raise KindInapplicable(f"column {j} is not eligible for {spec.kind}")
        return j
    return _choose(rng, eligible)


def _columns_equivalent(clean: TypedTable, pert: Table, j: int, k: Optional[int] = None) -> bool:
    p = TypedTable(pert)
    k = j if k is None else k
    return all(
        compare_values(clean.values[i][j], p.values[i][k], clean.types[j]).classification == EXACT
        for i in range(clean.table.n_rows))


def _numeric_cells(g: TypedTable) -> list[tuple[int, int]]:
    out = []
    for i, row in enumerate(g.table.rows):
        for j, cell in enumerate(row):
            v = g.values[i][j]
            if g.types[j] == NUMBER and isinstance(v, Number) and _single_literal(cell.raw):
                if Decimal(_single_literal(cell.raw).group().replace(",", "")) != 0:
                    out.append((i, j))
    return out


# -- kinds -------------------------------------------------------------------------------
# each returns (perturbed table, resolved target, params)

Result = tuple[Table, dict, dict]


def _typo(t: Table, g: TypedTable, spec, rng) -> Result:
    eligible = [(i, j) for i, row in enumerate(t.rows) for j, c in enumerate(row)
                if g.types[j] == TEXT and isinstance(g.values[i][j], Text)
                and sum(ch.isalpha() for ch in c.raw) >= 3]
    i, j = _cell_target(spec, eligible, rng)
    old = t.rows[i][j].raw
    letters = [p for p, ch in enumerate(old) if ch.isalpha() and ch.isascii()]
    if not letters:
        raise KindInapplicable("no ASCII letters to corrupt")
    pos = letters[int(rng.integers(len(letters)))]
    alphabet = [c for c in "abcdefghijklmnopqrstuvwxyz" if c != old[pos].lower()]
    ch = alphabet[int(rng.integers(len(alphabet)))]
    ch = ch.upper() if old[pos].isupper() else ch
    new = old[:pos] + ch + old[pos + 1:]
    rows = _rows(t)
    rows[i][j] = new
    out = _rebuild(t, t.headers, rows)
    nv = TypedTable(out).values[i][j]
    if not isinstance(nv, Text):
        raise KindInapplicable("typo changed the cell type")
    magnitude = 1.0 - lcs_ratio(norm_text(old), norm_text(new))
    return out, {"cell": [i, j]}, {"old": old, "new": new, "magnitude": magnitude}


_HEADER_MODES = ("upper", "lower", "title", "snake")


def _rephrase(base: str, mode: str) -> str:
    if mode == "upper":
        return base.upper()
    if mode == "lower":
        return base.lower()
    if mode == "title":
        return base.title()
    return re.sub(r"\s+", "_", base.strip().lower())


def _header_rephrase(t: Table, g: TypedTable, spec, rng) -> Result:
    fixed = spec.params.get("mode")
    if fixed is not None and fixed not in _HEADER_MODES:
        raise PerturbError(f"unknown header-rephrase mode {fixed!r}")
    # without a pinned mode, take the first one (in seeded order) that changes something
    modes = [fixed] if fixed else [_HEADER_MODES[k] for k in rng.permutation(len(_HEADER_MODES))]
    options: list = []
    for mode in modes:
        for j, h in enumerate(t.headers):
            base, unit = _split_header(h)
            new = _rephrase(base, mode) + unit
            if new != h and header_key(new) == header_key(h) and header_unit(new) == header_unit(h):
                options.append((j, new))
        if options:
            break
    if not options:
        raise KindInapplicable(f"no header changes under modes {modes}")
    if spec.target and "column" in spec.target:
        options = [o for o in options if o[0] == spec.target["column"]]
    j, new = _choose(rng, options)
    headers = list(t.headers)
    headers[j] = new
    return _rebuild(t, headers, _rows(t)), {"column": j}, {"mode": mode, "old": t.headers[j], "new": new}


_DATE_OUT = ("%Y-%m-%d", "%B %d, %Y", "%d %B %Y", "%b %d, %Y", "%m/%d/%Y")


def _date_format(t: Table, g: TypedTable, spec, rng) -> Result:
    eligible = [j for j in range(t.n_cols) if g.types[j] == DATE and all(
        isinstance(g.values[i][j], Date) or t.rows[i][j].raw == "" for i in range(t.n_rows))]
    j = _col_target(spec, eligible, rng, t.n_cols)
    formats = [f for f in _DATE_OUT if any(
        isinstance(g.values[i][j], Date) and g.values[i][j].value.strftime(f) != t.rows[i][j].raw
        for i in range(t.n_rows))]
    fmt = spec.params.get("format") or _choose(rng, formats)
    rows = _rows(t)
    for i in range(t.n_rows):
        v = g.values[i][j]
        if isinstance(v, Date):
            rows[i][j] = v.value.strftime(fmt)
    out = _rebuild(t, t.headers, rows)
    if not _columns_equivalent(g, out, j):
        raise KindInapplicable("reformatted dates do not parse back")
    return out, {"column": j}, {"format": fmt}


def _thousands(t: Table, g: TypedTable, spec, rng) -> Result:
    def toggled(raw: str) -> Optional[str]:
        m = _single_literal(raw)
        if not m:
            return None
        lit = m.group()
        if "," in lit:
            new = lit.replace(",", "")
        else:
            whole, _, frac = lit.partition(".")
            if len(whole) < 4:
                return None
            new = f"{int(whole):,}" + (f".{frac}" if frac else "")
        return raw[:m.start()] + new + raw[m.end():]

    eligible = [j for j in range(t.n_cols) if g.types[j] == NUMBER and any(
        isinstance(g.values[i][j], Number) and toggled(t.rows[i][j].raw) for i in range(t.n_rows))]
    j = _col_target(spec, eligible, rng, t.n_cols)
    rows = _rows(t)
    for i in range(t.n_rows):
        if isinstance(g.values[i][j], Number):
            new = toggled(rows[i][j])
            if new is not None:
                rows[i][j] = new
    out = _rebuild(t, t.headers, rows)
    if not _columns_equivalent(g, out, j):
        raise KindInapplicable("toggled numbers do not parse back")
    return out, {"column": j}, {}


_RESCALE = {
    "length": ("mm", "cm", "m", "km"),
    "time": ("s", "min", "h"),
    "mass": ("g", "kg"),
}


def _unit_rescale(t: Table, g: TypedTable, spec, rng) -> Result:
    options = []
    for j, h in enumerate(t.headers):
        u = header_unit(h)
        if u is not None and u.dimension in _RESCALE and g.types[j] == NUMBER:
            if all(isinstance(g.values[i][j], Number) and t.rows[i][j].value.unit is None
                   or t.rows[i][j].raw == "" for i in range(t.n_rows)):
                options.append(j)
    j = _col_target(spec, options, rng, t.n_cols)
    u = header_unit(t.headers[j])
    targets = [s for s in _RESCALE[u.dimension] if UNITS[s].to_base != u.to_base]
    sym = spec.params.get("to") or _choose(rng, targets)
    factor = u.to_base / UNITS[sym].to_base
    base, _ = _split_header(t.headers[j])
    headers = list(t.headers)
    headers[j] = f"{base} ({sym})"
    rows = _rows(t)
    for i in range(t.n_rows):
        v = g.values[i][j]
        if isinstance(v, Number):
            rows[i][j] = format_number(v.magnitude * factor)
    out = _rebuild(t, headers, rows)
    if len({header_key(h) for h in headers}) != len(headers) or not _columns_equivalent(g, out, j):
        raise KindInapplicable("rescaled column does not round-trip")
    return out, {"column": j}, {"from": u.symbol, "to": sym}


_SYMBOL_TO_CODE = {"$": "USD", "€": "EUR", "£": "GBP", "¥": "JPY"}
_CODE_TO_SYMBOL = {v: k for k, v in _SYMBOL_TO_CODE.items()}
_CURRENCY_CELL = re.compile(r"^(?P<sign>[-−]?)(?P<cur>[$€£¥]|USD|EUR|GBP|JPY)\s?(?P<rest>\d.*)$")


def _currency(t: Table, g: TypedTable, spec, rng) -> Result:
    def rewrite(raw: str) -> Optional[str]:
        m = _CURRENCY_CELL.match(raw.strip())
        if not m:
            return None
        cur = m.group("cur")
        swapped = _SYMBOL_TO_CODE.get(cur) or _CODE_TO_SYMBOL.get(cur)
        if swapped is None:
            return None
        sep = " " if swapped.isalpha() else ""
        return f"{m.group('sign')}{swapped}{sep}{m.group('rest')}"

    eligible = [j for j in range(t.n_cols) if any(rewrite(t.rows[i][j].raw) for i in range(t.n_rows))]
    j = _col_target(spec, eligible, rng, t.n_cols)
    rows = _rows(t)
    for i in range(t.n_rows):
        new = rewrite(rows[i][j])
        if new is not None:
            rows[i][j] = new
    out = _rebuild(t, t.headers, rows)
    if not _columns_equivalent(g, out, j):
        raise KindInapplicable("currency rewrite changed values")
    return out, {"column": j}, {}


def _numeric_rewrite(t: Table, g: TypedTable, spec, rng, fn: Callable) -> Result:
    eligible = _numeric_cells(g)
    if spec.target and "cell" in spec.target:
        eligible = [c for c in eligible if c == tuple(spec.target["cell"])] or eligible[:0]
    order = [eligible[k] for k in rng.permutation(len(eligible))] if eligible else []
    for i, j in order:
        raw = t.rows[i][j].raw
        m = _single_literal(raw)
        lit = m.group()
        old = Decimal(lit.replace(",", ""))
        new = fn(old, rng)
        if new is None or new == old or new == 0:
            continue
        new_raw = raw[:m.start()] + _render_decimal(new, "," in lit) + raw[m.end():]
        rows = _rows(t)
        rows[i][j] = new_raw
        out = _rebuild(t, t.headers, rows)
        nv = TypedTable(out).values[i][j]
        ov = g.values[i][j]
        if not (isinstance(nv, Number) and nv.unit == ov.unit):
            continue
        magnitude = float(abs(old - new) / abs(new))
        return out, {"cell": [i, j]}, {"old": raw, "new": new_raw, "magnitude": magnitude}
    raise KindInapplicable("no numeric cell accepts this change")


def _places(d: Decimal) -> int:
    return max(0, -d.normalize().as_tuple().exponent)


def _decimal_rounding(t: Table, g: TypedTable, spec, rng) -> Result:
    def fn(old: Decimal, rng) -> Optional[Decimal]:
        p = _places(old)
        if p == 0:
            return None
        return old.quantize(Decimal(1).scaleb(-(p - 1)), rounding=ROUND_HALF_UP)
    return _numeric_rewrite(t, g, spec, rng, fn)


def _numeric_shift(t: Table, g: TypedTable, spec, rng) -> Result:
    def fn(old: Decimal, rng) -> Optional[Decimal]:
        delta = Decimal(repr(round(float(rng.uniform(0.02, 0.15)), 4)))
        if rng.integers(2):
            delta = -delta
        p = _places(old)
        step = Decimal(1).scaleb(-p)
        new = (old * (1 + delta)).quantize(step, rounding=ROUND_HALF_UP)
        if new == old:
            new = old + (step if delta > 0 else -step)
        return new if new > 0 else None
    return _numeric_rewrite(t, g, spec, rng, fn)


def _header_reorder(t: Table, g: TypedTable, spec, rng) -> Result:
    perm = spec.params.get("order") or _permutation(rng, t.n_cols)
    if sorted(perm) != list(range(t.n_cols)):
        raise PerturbError("order must be a permutation of the columns")
    headers = [t.headers[k] for k in perm]
    rows = [[r[k] for k in perm] for r in _rows(t)]
    return _rebuild(t, headers, rows), {}, {"order": perm}


def _row_reorder(t: Table, g: TypedTable, spec, rng) -> Result:
    perm = spec.params.get("order") or _permutation(rng, t.n_rows)
    if sorted(perm) != list(range(t.n_rows)):
        raise PerturbError("order must be a permutation of the rows")
    src = _rows(t)
    out = _rebuild(t, t.headers, [src[k] for k in perm])
    if canonical_serialize(out) == canonical_serialize(t):
        raise KindInapplicable("rows are indistinguishable")
    return out, {}, {"order": perm}


def _merge_rows(t: Table, g: TypedTable, spec, rng) -> Result:
    src = _rows(t)
    eligible = [i for i in range(t.n_rows - 1) if src[i] != src[i + 1]]
    if spec.target and "row" in spec.target:
        i = spec.target["row"]
        if not 0 <= i < t.n_rows - 1:
            raise TargetOutOfRange(f"row {i} has no successor to merge")
    else:
        i = _choose(rng, eligible)
    merged = [a if a == b else f"{a}; {b}" for a, b in zip(src[i], src[i + 1])]
    out = _rebuild(t, t.headers, src[:i] + [merged] + src[i + 2:])
    m = TypedTable(out)

    def keys(v) -> set:
        return {value_key(x) for x in (v.items if isinstance(v, ListValue) else (v,))}

    # a merged list can still hold exactly the items of one source row
    changed = [j for j in range(t.n_cols) if src[i][j] != src[i + 1][j]
               and keys(m.norm[i][j]) not in (keys(g.norm[i][j]), keys(g.norm[i + 1][j]))]
    return out, {"row": i}, {"changed_columns": changed}


def _abbreviate(t: Table, g: TypedTable, spec, rng) -> Result:
    options = []
    keys = [header_key(h) for h in t.headers]
    for j, h in enumerate(t.headers):
        base, unit = _split_header(h)
        for m in re.finditer(r"[A-Za-z]{5,}", base):
            word = m.group()
            for k in (3, 4):
                new = base[:m.start()] + word[:k] + "." + base[m.end():] + unit
                nk = header_key(new)
                if nk not in keys and header_unit(new) == header_unit(h):
                    options.append((j, new))
    if spec.target and "column" in spec.target:
        options = [o for o in options if o[0] == spec.target["column"]]
    j, new = _choose(rng, options)
    headers = list(t.headers)
    headers[j] = new
    return _rebuild(t, headers, _rows(t)), {"column": j}, {"old": t.headers[j], "new": new}


def _drop_row(t: Table, g: TypedTable, spec, rng) -> Result:
    if t.n_rows < 2:
        raise KindInapplicable("need at least two rows")
    if spec.target and "row" in spec.target:
        i = spec.target["row"]
        if not 0 <= i < t.n_rows:
            raise TargetOutOfRange(f"row {i} out of range")
    else:
        i = int(rng.integers(t.n_rows))
    src = _rows(t)
    return _rebuild(t, t.headers, src[:i] + src[i + 1:]), {"row": i}, {}


def _drop_column(t: Table, g: TypedTable, spec, rng) -> Result:
    if t.n_cols < 2:
        raise KindInapplicable("need at least two columns")
    j = _col_target(spec, list(range(t.n_cols)), rng, t.n_cols)
    headers = [h for k, h in enumerate(t.headers) if k != j]
    rows = [[c for k, c in enumerate(r) if k != j] for r in _rows(t)]
    return _rebuild(t, headers, rows), {"column": j}, {}


_SPURIOUS_HEADERS = ("Notes", "Internal Code", "Reviewer", "Batch", "Source Ref", "Flag Level")
_SPURIOUS_WORDS = ("alpha", "bravo", "cedar", "delta", "ember", "fjord", "garnet", "harbor")


def _add_column(t: Table, g: TypedTable, spec, rng) -> Result:
    keys = {header_key(h) for h in t.headers}
    names = [h for h in _SPURIOUS_HEADERS if header_key(h) not in keys]
    name = spec.params.get("header") or _choose(rng, names)
    pos = int(spec.params["position"]) if "position" in spec.params else int(rng.integers(t.n_cols + 1))
    if not 0 <= pos <= t.n_cols:
        raise TargetOutOfRange(f"position {pos} out of range")
    numeric = bool(rng.integers(2))
    values = [str(int(rng.integers(100, 1000))) if numeric
              else _SPURIOUS_WORDS[int(rng.integers(len(_SPURIOUS_WORDS)))] for _ in range(t.n_rows)]
    headers = list(t.headers)
    headers.insert(pos, name)
    rows = _rows(t)
    for r, v in zip(rows, values):
        r.insert(pos, v)
    return _rebuild(t, headers, rows), {"column": pos}, {"header": name, "position": pos}


def _transpose(t: Table, g: TypedTable, spec, rng) -> Result:
    first = [t.headers[0]] + [r[0].raw for r in t.rows]
    keys = [header_key(x) for x in first]
    if any(not k for k in keys) or len(set(keys)) != len(keys):
        raise KindInapplicable("first column cannot serve as a header row")
    return transpose(t), {}, {}


_APPLY: dict[str, Callable[..., Result]] = {
    "typo-in-text": _typo,
    "header-rephrase": _header_rephrase,
    "date-format-change": _date_format,
    "thousands-separator-toggle": _thousands,
    "unit-rescale": _unit_rescale,
    "currency-symbol-normalize": _currency,
    "decimal-rounding": _decimal_rounding,
    "header-reorder": _header_reorder,
    "small-numeric-shift": _numeric_shift,
    "merge-two-rows": _merge_rows,
    "row-reorder": _row_reorder,
    "abbreviation-swap": _abbreviate,
    "drop-row": _drop_row,
    "drop-column": _drop_column,
    "add-spurious-column": _add_column,
    "transpose-table": _transpose,
}


def resolve_perturbation(t: Table, spec: PerturbationSpec) -> tuple[Table, PerturbationSpec]:
    """Apply ``spec`` and return the output with target and params filled in."""
    flat = flatten_hierarchical(t)
    g = TypedTable(flat)
    out, target, params = _APPLY[spec.kind](flat, g, spec, _rng(spec.seed))
    if canonical_serialize(out) == canonical_serialize(flat):
        raise KindInapplicable(f"{spec.kind} left the table unchanged")
    merged = {**spec.params, **params}
    return out, replace(spec, target=target or spec.target, params=merged)


def apply_perturbation(t: Table, spec: PerturbationSpec) -> Table:
    return resolve_perturbation(t, spec)[0]


# -- labels --------------------------------------------------------------------------------


def expected_rubric(case: BenchmarkCase) -> tuple[RubricCounts, list[float]]:
    """Counts and partial magnitudes a perfect evaluator reports for ``case``."""
    clean = flatten_hierarchical(case.clean)
    f: dict = {}
    mags: list[float] = []

    def bump(info: str, entity: str, k: int = 1) -> None:
        f[(info, entity)] = f.get((info, entity), 0) + k

    for s in case.applied:
        if s.kind == "drop-row":
            bump(MISSING, ROW)
        elif s.kind == "drop-column":
            bump(MISSING, COLUMN)
        elif s.kind == "add-spurious-column":
            bump(EXTRA, COLUMN)
        elif s.kind in ("typo-in-text", "decimal-rounding", "small-numeric-shift"):
            bump(PARTIAL_INFO, CELL)
            mags.append(float(s.params["magnitude"]))
        elif s.kind == "merge-two-rows":
            bump(MISSING, ROW)
            changed = s.params.get("changed_columns", [])
            if changed:
                bump(PARTIAL_INFO, CELL, len(changed))
                # a merged "a; b" list against a scalar is a full type difference
                mags.extend([1.0] * len(changed))
    return RubricCounts(f, clean.n_rows, clean.n_cols), mags


def expected_to_dict(counts: RubricCounts, mags: list[float]) -> dict:
    return {"counts": counts.to_dict(), "partial_magnitudes": mags}


# -- benchmark generation -----------------------------------------------------------------


def _normalize_mix(mix: dict, kinds: Sequence[str]) -> dict:
    bands = {b: w for b, w in mix.items() if w > 0 and any(KINDS[k] == b for k in kinds)}
    for b in mix:
        if b not in BANDS:
            raise PerturbError(f"unknown difficulty band {b!r}")
    total = sum(bands.values())
    if total <= 0:
        raise PerturbError("mix selects no available band")
    return {b: bands[b] / total for b in BANDS if b in bands}


def _table_id(t: Table, index: int) -> str:
    return t.source_id or f"table{index:03d}"


def generate_benchmark(cleans: Sequence[Table], per_table: int = 5, mix: Optional[dict] = None,
                       seed: int = 0, kinds: Optional[Sequence[str]] = None) -> list[BenchmarkCase]:
    """``per_table`` single-perturbation cases per clean table.

    The band is drawn from ``mix``, the kind uniformly within the band; a kind
    that does not fit the table is replaced by another from the same band,
    then from the remaining bands.
    """
    if per_table < 1:
        raise PerturbError("per_table must be at least 1")
    pool = list(kinds) if kinds else list(KINDS)
    for k in pool:
        if k not in KINDS:
            raise PerturbError(f"unknown perturbation kind {k!r}")
    weights = _normalize_mix(mix or DEFAULT_MIX, pool)
    bands = list(weights)
    probs = np.array([weights[b] for b in bands])
    cases = []
    for ti, clean in enumerate(cleans):
        tid = _table_id(clean, ti)
        for ci in range(per_table):
            cs = case_seed(seed, tid, ci)
            rng = _rng(cs)
            band = bands[int(rng.choice(len(bands), p=probs))]
            order = [band] + [b for b in bands if b != band]
            made = None
            for b in order:
                options = [k for k in pool if KINDS[k] == b]
                while options and made is None:
                    kind = options.pop(int(rng.integers(len(options))))
                    spec = PerturbationSpec(kind, int(rng.integers(2 ** 63)))
                    try:
                        made = resolve_perturbation(clean, spec)
                    except KindInapplicable:
                        continue
                if made is not None:
                    break
            if made is None:
                raise KindInapplicable(f"no requested kind applies to table {tid}")
            out, resolved = made
            cases.append(BenchmarkCase(f"{tid}-{ci:03d}", tid, clean, out, [resolved],
                                       "synthetic", cs))
    return cases


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1) + "\n"


def write_benchmark(cases: Sequence[BenchmarkCase], out_dir: str, meta: Optional[dict] = None) -> str:
    os.makedirs(os.path.join(out_dir, "clean"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "cases"), exist_ok=True)
    entries = []
    written: set = set()
    for case in cases:
        clean_rel = f"clean/{case.table_id}.json"
        if case.table_id not in written:
            with open(os.path.join(out_dir, clean_rel), "wb") as fh:
                fh.write(canonical_serialize(case.clean))
            written.add(case.table_id)
        case_rel = f"cases/{case.case_id}.json"
        with open(os.path.join(out_dir, case_rel), "wb") as fh:
            fh.write(canonical_serialize(case.perturbed))
        counts, mags = expected_rubric(case)
        entries.append({
            "case_id": case.case_id, "table_id": case.table_id,
            "clean": clean_rel, "perturbed": case_rel,
            "kinds": case.kinds, "difficulty": [s.difficulty for s in case.applied],
            "applied": [s.to_dict() for s in case.applied],
            "seed": case.seed, "provenance": case.provenance,
            "formatting_only": case.formatting_only,
            "positive": not counts.is_clean(),
            "expected": expected_to_dict(counts, mags),
        })
    manifest = {"version": BENCH_VERSION, **(meta or {}), "cases": entries}
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump(manifest))
    return path


class ManifestError(PerturbError):
    pass


def load_manifest(bench_dir: str) -> dict:
    path = os.path.join(bench_dir, "manifest.json")
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, ValueError) as e:
        raise ManifestError(f"cannot read {path}: {e}") from None
    if manifest.get("version") != BENCH_VERSION or not isinstance(manifest.get("cases"), list):
        raise ManifestError(f"{path} is not a {BENCH_VERSION} manifest")
    for entry in manifest["cases"]:
        for key in ("case_id", "clean", "perturbed", "expected"):
            if key not in entry:
                raise ManifestError(f"manifest entry lacks {key!r}")
    return manifest


def load_case_tables(bench_dir: str, entry: dict) -> tuple[Table, Table]:
    def read(rel: str) -> Table:
        try:
            with open(os.path.join(bench_dir, rel), "rb") as fh:
                return parse_json(fh.read().decode("utf-8"))
        except OSError as e:
            raise ManifestError(f"missing benchmark file {rel}: {e}") from None
    return read(entry["clean"]), read(entry["perturbed"])
