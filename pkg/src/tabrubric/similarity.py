"""Sequence similarity helpers shared by alignment, comparison and baselines."""

from __future__ import annotations

import re
from typing import Sequence

_WS = re.compile(r"\s+")


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def norm_text(text: str) -> str:
    """Case-folded, whitespace-collapsed text used for every exact comparison."""
    return collapse_ws(text).casefold()


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            if x == y:
                cur.append(prev[j] + 1)
            else:
                cur.append(max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def lcs_ratio(a: Sequence, b: Sequence) -> float:
    """2*LCS/(|a|+|b|); two empty sequences are identical (1.0)."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * lcs_length(a, b) / total
