import pytest
from hypothesis import assume, given, settings, strategies as st

from tabrubric.align import align
from tabrubric.compare import (
    EXACT, MISMATCH, PARTIAL, ComparisonTuple, Residue, compare_aligned_tables, compare_cells,
    compare_values, compute_magnitude, tuple_violations,
)
from tabrubric.table import Cell, Table
from tabrubric.values import NUMBER, Number, UNITS


def cmp(a, b, **kw):
    return compare_cells(Cell(a), Cell(b), **kw)


def test_numeric_partial_magnitude():
    t = cmp("7", "5")
    assert t.classification == PARTIAL and t.magnitude == pytest.approx(0.4)


def test_date_gap_against_day_of_month():
    t = cmp("03/03/2020", "03/05/2020")
    assert t.classification == PARTIAL and t.magnitude == pytest.approx(2 / 5)


def test_duration_months_vs_days():
    # 2 months = 60.88 days under the 30.44-day month
    t = cmp("2 months", "61 days")
    assert t.classification == PARTIAL
    assert t.magnitude == pytest.approx(0.12 / 61, rel=1e-9)


@pytest.mark.parametrize("a,b", [
    ("100k", "100,000"), ("1 m", "100 cm"), ("March 3, 2020", "03/03/2020"), ("ABC ", "abc"),
    ("a; b", "b; a"), ("Yes", "true"), ("", ""),
])
def test_exact_equivalences(a, b):
    assert cmp(a, b).classification == EXACT


def test_incompatible_units():
    t = cmp("5 kg", "5 m")
    assert t.classification == MISMATCH and t.note == "incompatible-units"


def test_type_mismatch():
    assert cmp("Paris", "2020-01-01").classification == MISMATCH


def test_blank_sides():
    assert cmp("5", "").note == "missing-value"
    assert cmp("", "5").note == "extra-value"


def test_header_unit_applies():
    from tabrubric.values import header_unit
    t = compare_cells(Cell("112"), Cell("1.8666666667"), gt_unit=header_unit("Runtime (min)"),
                      cand_unit=header_unit("Runtime (h)"))
    assert t.classification == EXACT


def test_zero_reference_keeps_absolute_difference():
    t = cmp("3", "0")
    assert t.classification == PARTIAL and t.magnitude == 3 and t.note == "zero-reference"


def test_one_item_list_against_scalar():
    from tabrubric.values import ListValue, Text
    t = compare_values(ListValue((Text("Nile"),)), Text("nile"))
    assert t.classification == EXACT


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).filter(lambda x: abs(x) > 1e-3)
scales = st.floats(min_value=1e-3, max_value=1e3)


@settings(max_examples=300, deadline=None)
@given(finite, finite, scales)
def test_magnitude_scale_invariant(a, b, k):
    m1 = compute_magnitude(Number(a), Number(b))
    m2 = compute_magnitude(Number(a * k), Number(b * k))
    assert m2 == pytest.approx(m1, rel=1e-9, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(finite, finite, st.sampled_from(["cm", "mm", "km", "ft", "in"]))
def test_magnitude_unit_invariant(a, b, sym):
    u, m = UNITS[sym], UNITS["m"]
    in_m = compute_magnitude(Number(a * u.to_base, m), Number(b * u.to_base, m))
    in_u = compute_magnitude(Number(a, u), Number(b, u))
    assert in_u == pytest.approx(in_m, rel=1e-9, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.one_of(finite.map(lambda x: format(x, ".4f")),
                 st.text(st.characters(whitelist_categories=("L", "N")), min_size=1, max_size=10),
                 st.dates().map(lambda d: d.isoformat())))
def test_exact_on_self(raw):
    t = cmp(raw, raw)
    assert t.classification == EXACT and tuple_violations(t) == []


def _tuple(**kw):
    base = dict(gt_row=0, gt_col=0, cand_row=0, cand_col=0, data_type=NUMBER,
                gt_value=Number(1.0), cand_value=Number(2.0), gt_unit=None, cand_unit=None,
                classification=PARTIAL, magnitude=0.5)
    base.update(kw)
    return ComparisonTuple(**base)


def test_invariant_gate():
    assert tuple_violations(_tuple()) == []
    assert tuple_violations(_tuple(magnitude=-0.1))
    assert tuple_violations(_tuple(magnitude=float("nan")))
    assert tuple_violations(_tuple(classification="close"))
    assert tuple_violations(_tuple(classification=EXACT, magnitude=0.3))
    assert tuple_violations(_tuple(magnitude=0.0))
    assert tuple_violations(_tuple(gt_unit=UNITS["kg"], cand_unit=UNITS["m"]))
    assert tuple_violations(_tuple(gt_unit=UNITS["kg"], cand_unit=UNITS["m"],
                                   classification=MISMATCH, magnitude=None)) == []


def test_tuple_dict_round_trip():
    t = cmp("5 kg", "4 kg")
    assert ComparisonTuple.from_dict(t.to_dict()) == t


@st.composite
def table_pair(draw):
    cols = draw(st.integers(1, 4))
    headers = [f"c{j}" for j in range(cols)]
    n = draw(st.integers(0, 5))
    rows = [[str(draw(st.integers(0, 30))) for _ in headers] for _ in range(n)]
    keep_rows = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    keep_cols = draw(st.lists(st.booleans(), min_size=cols, max_size=cols))
    assume(any(keep_cols))
    ch = [h for h, k in zip(headers, keep_cols) if k]
    extra = draw(st.integers(0, 2))
    ch += [f"x{e}" for e in range(extra)]
    crow = [[c for c, k in zip(r, keep_cols) if k] + ["z"] * extra
            for r, kr in zip(rows, keep_rows) if kr]
    return Table.from_strings(headers, rows), Table.from_strings(ch, crow)


@settings(max_examples=150, deadline=None)
@given(table_pair())
def test_tuple_and_residue_conservation(pair):
    gt, cand = pair
    a, g, c = align(gt, cand)
    comp = compare_aligned_tables(g, c, a)
    covered = len(a.row_map) * len(a.column_map)
    assert len(comp.tuples) == covered
    assert comp.residue.missing_cells + covered == g.table.n_cells
    assert comp.residue.extra_cells + covered == c.table.n_cells
    assert Residue.from_dict(comp.residue.to_dict()) == comp.residue
    for t in comp.tuples:
        assert tuple_violations(t) == []
