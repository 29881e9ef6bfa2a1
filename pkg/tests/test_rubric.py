import random
from dataclasses import replace
from decimal import Decimal
from fractions import Fraction

import pytest

from laws import DIMS, oracle_score, random_fixture, random_weights
from tabrubric.pipeline import evaluate
from tabrubric.rubric import (
    CELL, COLUMN, EXTRA, MISSING, PARTIAL_INFO, ROW, RubricCounts, RubricError, RubricReport,
    WeightConfig, ZeroDenominator, aggregate_stats, compute_gamma, compute_score, load_weights,
    parse_weights, recompute_score, sweep_weights,
)
from tabrubric.table import Table, read_table


def test_gamma_exact():
    assert compute_gamma(0.4, WeightConfig.paper_default()) == Decimal("0.36")
    assert compute_gamma(None, WeightConfig.paper_default()) == 1


def test_worked_example_score(example_paths):
    gt, cand = (read_table(p) for p in example_paths)
    rep = evaluate(gt, cand).report
    # 1*0.9*1/5 + 0.9*1*1/5 + 0.8*0.8*(1/25)*0.9*0.4
    assert rep.score == Decimal("0.369216")
    assert abs(float(rep.score) - 0.3688) <= 0.001
    assert rep.counts.get(MISSING, ROW) == 1 and rep.counts.get(EXTRA, COLUMN) == 1
    assert rep.partial_magnitudes == [pytest.approx(0.4)]
    s = rep.structure_descriptor
    assert s["missing"]["rows"] == 1 and s["extra"]["columns"] == 1


def test_single_missing_row_of_two():
    w = WeightConfig(1, 0, 0, 1, 0, 0, 0)
    counts = RubricCounts({(MISSING, ROW): 1}, 2, 3)
    assert compute_score(counts, [], w) == Decimal("0.5")


def test_end_to_end_missing_row_of_two():
    gt = Table.from_strings(["a", "b"], [["x", "1"], ["y", "2"]])
    cand = Table.from_strings(["a", "b"], [["x", "1"]])
    w = WeightConfig(1, 0, 0, 1, 0, 0, 0)
    assert evaluate(gt, cand, w).report.score == Decimal("0.5")


def test_zero_denominator():
    with pytest.raises(ZeroDenominator):
        compute_score(RubricCounts({(MISSING, ROW): 1}, 0, 2), [], WeightConfig())
    with pytest.raises(ZeroDenominator):
        compute_score(RubricCounts({}, 0, 2), [0.3], WeightConfig())


def test_negative_weight_rejected():
    with pytest.raises(RubricError):
        WeightConfig(beta_missing=Decimal("-1"))


def test_parse_weights():
    w = parse_weights("profile = paper-default\nbeta.missing = 0  # off\nalpha_col: 0.5\n")
    assert w.beta_missing == 0 and w.alpha_column == Decimal("0.5") and w.beta_extra == Decimal("0.9")
    for bad in ("nonsense", "beta_missing = x", "gamma = 1", "profile = other"):
        with pytest.raises(RubricError):
            parse_weights(bad)
    assert load_weights("paper-default") == WeightConfig()


def test_score_matches_fraction_oracle():
    rng = random.Random(1)
    for _ in range(500):
        counts, mags = random_fixture(rng)
        w = random_weights(rng, positive=False)
        # Decimal carries 28 significant digits; divisions by N are not exact
        got = Fraction(str(compute_score(counts, mags, w)))
        assert abs(got - oracle_score(counts, mags, w)) <= Fraction(1, 10 ** 20)


def test_zero_iff_clean():
    rng = random.Random(2)
    for _ in range(300):
        counts, mags = random_fixture(rng)
        w = random_weights(rng)
        assert (compute_score(counts, mags, w) == 0) == (counts.is_clean() and not mags)


def test_weight_monotonicity():
    rng = random.Random(3)
    for _ in range(300):
        counts, mags = random_fixture(rng)
        w = random_weights(rng)
        dim = rng.choice(DIMS)
        bigger = replace(w, **{dim: getattr(w, dim) + Decimal("0.5")})
        assert compute_score(counts, mags, bigger) >= compute_score(counts, mags, w)


def test_linear_in_counts():
    w = WeightConfig()
    one = compute_score(RubricCounts({(EXTRA, ROW): 1}, 10, 4), [], w)
    three = compute_score(RubricCounts({(EXTRA, ROW): 3}, 10, 4), [], w)
    assert three == 3 * one


def test_report_self_consistency():
    gt = Table.from_strings(["k", "v", "d"], [["a", "1", "2020-01-01"], ["b", "2", "2020-01-05"],
                                              ["c", "3", "2020-02-01"]])
    cand = Table.from_strings(["k", "v", "d"], [["a", "1.5", "2020-01-01"], ["b", "2", "2020-01-07"]])
    d = evaluate(gt, cand).report.to_dict()
    assert Decimal(d["score_decimal"]) == recompute_score(d)
    assert sum(Decimal(v) for v in d["terms"].values()) == Decimal(d["score_decimal"])
    back = RubricReport.from_dict(d)
    assert back.to_dict() == d


def test_aggregate_means():
    gt = Table.from_strings(["k", "v"], [["a", "1"], ["b", "2"]])
    r1 = evaluate(gt, Table.from_strings(["k", "v"], [["a", "1"]])).report
    r2 = evaluate(gt, gt).report
    stats = aggregate_stats([r1, r2.to_dict()])
    assert stats.n_reports == 2
    assert stats.structure["row"]["MI"] == 0.5
    assert stats.structure["row"]["EM"] == pytest.approx((1 + 2) / 2)
    with pytest.raises(RubricError):
        aggregate_stats([])


def test_sweep_configurations():
    base = WeightConfig()
    for low in ("0", "0.25"):
        configs = sweep_weights(base, Decimal(low))
        assert len(configs) == 64 and len(set(configs)) == 64
        assert all(c.omega_p == base.omega_p for c in configs)
    assert all(getattr(c, d) > 0 for c in sweep_weights(base, Decimal("0.25"))
               for d in DIMS)
    with pytest.raises(RubricError):
        sweep_weights(base, Decimal("1"))


def test_counts_dict_round_trip():
    c = RubricCounts({(PARTIAL_INFO, CELL): 2, (MISSING, COLUMN): 1}, 3, 4)
    assert RubricCounts.from_dict(c.to_dict()) == c
