"""Randomized rubric-count fixtures and an independent Fraction-based score oracle."""

import random
from decimal import Decimal
from fractions import Fraction

from tabrubric.rubric import CELL, COLUMN, EXTRA, MISSING, PARTIAL_INFO, ROW, RubricCounts, WeightConfig

DIMS = ("beta_missing", "beta_extra", "beta_partial", "alpha_row", "alpha_column", "alpha_cell", "omega_p")


def random_fixture(rng: random.Random):
    n_rows, n_cols = rng.randint(1, 12), rng.randint(1, 8)
    f = {}
    for info in (MISSING, EXTRA):
        for entity, cap in ((ROW, n_rows), (COLUMN, n_cols), (CELL, n_rows * n_cols)):
            if rng.random() < 0.3:
                f[(info, entity)] = rng.randint(1, cap)
    mags = []
    if rng.random() < 0.5:
        k = rng.randint(1, n_rows * n_cols)
        f[(PARTIAL_INFO, CELL)] = k
        mags = [round(rng.uniform(0.001, 3.0), 6) for _ in range(k)]
    return RubricCounts(f, n_rows, n_cols), mags


def random_weights(rng: random.Random, positive: bool = True) -> WeightConfig:
    lo = 1 if positive else 0
    return WeightConfig(**{d: Decimal(rng.randint(lo, 20)) / 10 for d in DIMS})


def oracle_score(counts: RubricCounts, mags, w: WeightConfig) -> Fraction:
    F = lambda x: Fraction(str(x))
    beta = {MISSING: F(w.beta_missing), EXTRA: F(w.beta_extra)}
    alpha = {ROW: F(w.alpha_row), COLUMN: F(w.alpha_column), CELL: F(w.alpha_cell)}
    size = {ROW: counts.n_rows, COLUMN: counts.n_cols, CELL: counts.n_rows * counts.n_cols}
    total = Fraction(0)
    for info in (MISSING, EXTRA):
        for e in (ROW, COLUMN, CELL):
            total += beta[info] * alpha[e] * counts.get(info, e) / size[e]
    for m in mags:
        total += F(w.beta_partial) * alpha[CELL] / size[CELL] * F(w.omega_p) * F(m)
    return total
