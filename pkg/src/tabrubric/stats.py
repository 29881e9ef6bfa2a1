"""Rank-agreement, correlation and detection metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Mapping, Optional, Sequence

Ranking = Sequence[Hashable]

WEIGHTED_KENDALL_SCHEME = "hyperbolic-additive: w(i,j) = 1/(i+1) + 1/(j+1), positions in the first ranking"


class StatsError(ValueError):
    pass


class DegenerateInput(StatsError):
    pass


class TooFewItems(StatsError):
    pass


class InvalidP(StatsError):
    pass


class MismatchedItems(StatsError):
    pass


def _check_pair(a: Ranking, b: Ranking, min_n: int = 2) -> tuple[dict, dict]:
    pa = {x: i for i, x in enumerate(a)}
    pb = {x: i for i, x in enumerate(b)}
    if len(pa) != len(a) or len(pb) != len(b):
        raise MismatchedItems("rankings contain duplicates")
    if pa.keys() != pb.keys():
        raise MismatchedItems("rankings cover different items")
    if len(pa) < min_n:
        raise TooFewItems(f"need at least {min_n} items, got {len(pa)}")
    return pa, pb


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise StatsError("pearson needs equal-length inputs")
    n = len(x)
    if n < 2:
        raise TooFewItems("pearson needs at least 2 points")
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(v * v for v in dx)
    syy = math.fsum(v * v for v in dy)
    if sxx == 0 or syy == 0:
        raise DegenerateInput("zero variance")
    r = math.fsum(u * v for u, v in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def kendall_tau(a: Ranking, b: Ranking) -> float:
    """(concordant - discordant) / (n choose 2)."""
    pa, pb = _check_pair(a, b)
    score = 0
    for x, y in combinations(pa, 2):
        score += 1 if (pa[x] - pa[y]) * (pb[x] - pb[y]) > 0 else -1
    n = len(pa)
    return score / (n * (n - 1) // 2)


def spearman_rho(a: Ranking, b: Ranking) -> float:
    pa, pb = _check_pair(a, b)
    items = list(pa)
    return pearson([pa[x] for x in items], [pb[x] for x in items])


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean
        i = j + 1
    return ranks


def spearman_from_scores(x: Sequence[float], y: Sequence[float]) -> float:
    return pearson(average_ranks(x), average_ranks(y))


def weighted_kendall(a: Ranking, b: Ranking) -> float:
    """Kendall's tau with pairs weighted toward the top of ``a``."""
    pa, pb = _check_pair(a, b)
    num = den = 0.0
    for x, y in combinations(pa, 2):
        w = 1.0 / (pa[x] + 1) + 1.0 / (pa[y] + 1)
        den += w
        num += w if (pa[x] - pa[y]) * (pb[x] - pb[y]) > 0 else -w
    return num / den


def rbo(a: Ranking, b: Ranking, p: float = 0.9) -> float:
    """Extrapolated rank-biased overlap of two full rankings of equal length."""
    if not 0 < p < 1:
        raise InvalidP(f"p must lie in (0, 1), got {p}")
    _check_pair(a, b, min_n=1)
    k = len(a)
    seen_a: set = set()
    seen_b: set = set()
    overlap = 0
    total = 0.0
    for d in range(1, k + 1):
        x, y = a[d - 1], b[d - 1]
        if x == y:
            overlap += 1
        else:
            overlap += (x in seen_b) + (y in seen_a)
        seen_a.add(x)
        seen_b.add(y)
        total += overlap / d * p ** d
    value = (1 - p) / p * total + overlap / k * p ** k
    return max(0.0, min(1.0, value))


def footrule_raw(a: Ranking, b: Ranking) -> int:
    pa, pb = _check_pair(a, b, min_n=1)
    return sum(abs(pa[x] - pb[x]) for x in pa)


def footrule(a: Ranking, b: Ranking) -> float:
    """Sum of absolute displacements over its maximum floor(n^2 / 2)."""
    pa, _ = _check_pair(a, b)
    n = len(pa)
    return footrule_raw(a, b) / (n * n // 2)


@dataclass(frozen=True)
class DetectionOutcome:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise StatsError("detection counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_flags(cls, truth: Sequence[bool], flagged: Sequence[bool]) -> "DetectionOutcome":
        if len(truth) != len(flagged):
            raise StatsError("truth and flags differ in length")
        tp = sum(t and f for t, f in zip(truth, flagged))
        fp = sum((not t) and f for t, f in zip(truth, flagged))
        tn = sum((not t) and (not f) for t, f in zip(truth, flagged))
        return cls(tp, fp, tn, len(truth) - tp - fp - tn)


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def detection_metrics(o: DetectionOutcome) -> dict:
    """Sensitivity, specificity, accuracy, F1 and their 3-way harmonic mean.

    Undefined ratios are ``None`` rather than zero.
    """
    sens = _ratio(o.tp, o.tp + o.fn)
    spec = _ratio(o.tn, o.tn + o.fp)
    acc = _ratio(o.tp + o.tn, o.total)
    f1 = _ratio(2 * o.tp, 2 * o.tp + o.fp + o.fn)
    if None in (sens, spec, acc):
        h3 = None
    elif 0 in (sens, spec, acc):
        h3 = 0.0
    else:
        h3 = 3 / (1 / acc + 1 / sens + 1 / spec)
    return {"sensitivity": sens, "specificity": spec, "accuracy": acc, "f1": f1, "harmonic3": h3}


def scores_to_ranking(scores: Mapping[Hashable, float], orientation: str = "lower-better") -> list:
    """Best first; equal scores fall back to ascending id."""
    if orientation not in ("lower-better", "higher-better"):
        raise StatsError(f"unknown orientation {orientation!r}")
    for k, v in scores.items():
        if not math.isfinite(v):
            raise StatsError(f"score for {k!r} is not finite")
    sign = 1 if orientation == "lower-better" else -1
    return sorted(scores, key=lambda k: (sign * scores[k], str(k)))


def correlation_battery(reference: Ranking, other: Ranking, p: float = 0.9) -> list[dict]:
    """Rows of (metric, value, n, parameters); ``reference`` drives top weighting."""
    n = len(reference)
    return [
        {"metric": "spearman_rho", "value": spearman_rho(reference, other), "n": n, "parameters": ""},
        {"metric": "kendall_tau", "value": kendall_tau(reference, other), "n": n, "parameters": ""},
        {"metric": "weighted_kendall", "value": weighted_kendall(reference, other), "n": n,
         "parameters": WEIGHTED_KENDALL_SCHEME},
        {"metric": "rbo", "value": rbo(reference, other, p), "n": n, "parameters": f"p={p}"},
        {"metric": "footrule", "value": footrule(reference, other), "n": n,
         "parameters": "normalized by floor(n^2/2)"},
    ]
