"""Brute-force reference implementations, written independently of the package."""

from fractions import Fraction
from functools import lru_cache
from itertools import permutations


def kendall(a, b):
    n = len(a)
    pos = {x: i for i, x in enumerate(b)}
    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            s += 1 if pos[a[i]] < pos[a[j]] else -1
    return Fraction(s, n * (n - 1) // 2)


def spearman(a, b):
    n = len(a)
    pos = {x: i for i, x in enumerate(b)}
    d2 = sum((i - pos[x]) ** 2 for i, x in enumerate(a))
    return 1 - Fraction(6 * d2, n * (n * n - 1))


def weighted_kendall(a, b):
    pos = {x: i for i, x in enumerate(b)}
    num = den = Fraction(0)
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            w = Fraction(1, i + 1) + Fraction(1, j + 1)
            den += w
            num += w if pos[a[i]] < pos[a[j]] else -w
    return num / den


def rbo(a, b, p=Fraction(9, 10)):
    k = len(a)
    total = Fraction(0)
    for d in range(1, k + 1):
        x = len(set(a[:d]) & set(b[:d]))
        total += Fraction(x, d) * p ** d
    xk = len(set(a) & set(b))
    return (1 - p) / p * total + Fraction(xk, k) * p ** k


def footrule(a, b):
    n = len(a)
    pos = {x: i for i, x in enumerate(b)}
    raw = sum(abs(i - pos[x]) for i, x in enumerate(a))
    return raw, Fraction(raw, worst_displacement(n))


@lru_cache(maxsize=None)
def worst_displacement(n):
    return max(sum(abs(i - q[i]) for i in range(n)) for q in permutations(range(n)))
