import itertools
import random

import numpy as np
import pytest

from tabrubric.align import (
    RELAXED, STRICT, Alignment, Pair, align, apply_proposals, detect_transpose, exact_align,
    max_weight_matching, similarity_align,
)
from tabrubric.columns import TypedTable
from tabrubric.llm import AlignmentProposal
from tabrubric.table import Table, transpose

GT = Table.from_strings(
    ["Team", "City", "Wins", "Losses"],
    [["Hawks", "Atlanta", "41", "41"], ["Bulls", "Chicago", "40", "42"],
     ["Heat", "Miami", "44", "38"], ["Suns", "Phoenix", "45", "37"]])


def brute_force_best(s, threshold=0.0):
    """Exhaustive maximum over all partial injective maps, entries below threshold excluded."""
    n, m = s.shape
    best = 0.0
    if n <= m:
        for perm in itertools.permutations(range(m), n):
            best = max(best, sum(s[i, perm[i]] for i in range(n) if s[i, perm[i]] >= threshold))
    else:
        for perm in itertools.permutations(range(n), m):
            best = max(best, sum(s[perm[j], j] for j in range(m) if s[perm[j], j] >= threshold))
    return best


def matching_weight(s, pairs):
    return sum(s[i, j] for i, j in pairs)


def test_identity_alignment_is_strict_and_complete():
    a, _, _ = align(GT, GT)
    assert [(p.gt, p.cand) for p in a.row_map] == [(i, i) for i in range(4)]
    assert [(p.gt, p.cand) for p in a.column_map] == [(j, j) for j in range(4)]
    assert a.strictness == STRICT and not a.transposed


def test_missing_row():
    cand = Table.from_strings(GT.headers, [r for i, r in enumerate(GT.raw_rows()) if i != 2])
    a, _, _ = align(GT, cand)
    assert a.unmatched_gt_rows == [2] and a.unmatched_cand_rows == []


def test_reordered_rows_and_columns():
    order = [3, 1, 0, 2]
    cand = Table.from_strings([GT.headers[j] for j in order],
                              [[r[j] for j in order] for r in reversed(GT.raw_rows())])
    a, _, _ = align(GT, cand)
    assert {(p.gt, p.cand) for p in a.column_map} == {(j, order.index(j)) for j in range(4)}
    assert {(p.gt, p.cand) for p in a.row_map} == {(i, 3 - i) for i in range(4)}


def test_disjoint_headers_and_values_align_nothing():
    cand = Table.from_strings(["Foo", "Bar"], [["q", "r"], ["s", "t"]])
    a, _, _ = align(GT, cand)
    assert a.column_map == () and a.row_map == ()


def test_abbreviated_header_pairs_relaxed():
    gt = Table.from_strings(["Company", "Revenue"], [["Acme", "10"], ["Globex", "12"]])
    cand = Table.from_strings(["Company", "Rev."], [["Acme", "10"], ["Globex", "12"]])
    a, _, _ = align(gt, cand)
    pairs = {(p.gt, p.cand): p.strictness for p in a.column_map}
    assert pairs == {(0, 0): STRICT, (1, 1): RELAXED}


def test_header_case_and_snake_case_are_strict():
    cand = Table.from_strings(["team", "CITY", "wins", "LOSSES"], GT.raw_rows())
    a, _, _ = align(GT, cand)
    assert a.strictness == STRICT and len(a.column_map) == 4


def test_ties_prefer_lower_indices():
    s = np.ones((3, 3))
    assert max_weight_matching(s) == [(0, 0), (1, 1), (2, 2)]
    assert max_weight_matching(np.array([[0.5, 0.5]])) == [(0, 0)]


def test_threshold_excludes_pairs():
    s = np.array([[0.9, 0.2], [0.3, 0.4]])
    assert max_weight_matching(s, 0.5) == [(0, 0)]


def test_empty_matrix():
    assert max_weight_matching(np.zeros((0, 3))) == []


def test_matching_matches_brute_force():
    rng = random.Random(7)
    for _ in range(300):
        n, m = rng.randint(1, 6), rng.randint(1, 6)
        s = np.array([[rng.random() for _ in range(m)] for _ in range(n)])
        got = matching_weight(s, max_weight_matching(s))
        assert abs(got - brute_force_best(s)) <= 1e-9


def test_thresholded_matching_matches_brute_force():
    rng = random.Random(11)
    for _ in range(200):
        n, m = rng.randint(1, 5), rng.randint(1, 5)
        s = np.array([[rng.random() for _ in range(m)] for _ in range(n)])
        got = matching_weight(s, max_weight_matching(s, 0.5))
        assert abs(got - brute_force_best(s, 0.5)) <= 1e-9


def test_alignment_permutation_invariant():
    rng = random.Random(3)
    for _ in range(10):
        order = list(range(4))
        rng.shuffle(order)
        cand = Table.from_strings(GT.headers, [GT.raw_rows()[i] for i in order])
        a, _, _ = align(GT, cand)
        assert {(p.gt, p.cand) for p in a.row_map} == {(i, order.index(i)) for i in range(4)}


def test_detect_transpose():
    assert detect_transpose(GT, transpose(GT))
    assert not detect_transpose(GT, GT)
    a, _, c = align(GT, transpose(GT))
    assert a.transposed and len(a.row_map) == 4 and len(a.column_map) == 4


def test_detect_transpose_with_a_typo():
    rows = [r[:] for r in transpose(GT).raw_rows()]
    rows[0][1] = "Atlnta"
    cand = Table.from_strings(transpose(GT).headers, rows)
    assert detect_transpose(GT, cand)


def test_similarity_stage_keeps_strict_pairs():
    g = TypedTable(GT)
    base = exact_align(g, g)
    assert similarity_align(g, g, base) == base


def test_alignment_dict_round_trip():
    a, _, _ = align(GT, transpose(GT))
    assert Alignment.from_dict(a.to_dict()) == a


def test_check_rejects_non_injective():
    a = Alignment((2, 2), (2, 2), (Pair(0, 0, STRICT), Pair(1, 0, STRICT)))
    with pytest.raises(ValueError):
        a.check()


def test_llm_proposal_adds_semantic_pair():
    gt = Table.from_strings(["Player", "Team"], [["Ann", "Rovers"], ["Bo", "United"]])
    cand = Table.from_strings(["Player", "Club"], [["Ann", "Rvrs FC"], ["Bo", "Utd"]])
    a, _, _ = align(gt, cand)
    assert a.unmatched_gt_cols == [1]
    refined = apply_proposals(gt, cand, a, [AlignmentProposal("column", "Team", "Club")])
    assert (1, 1) in {(p.gt, p.cand) for p in refined.column_map}


def test_llm_proposal_cannot_remap_strict_pair():
    a, _, _ = align(GT, GT)
    refined = apply_proposals(GT, GT, a, [AlignmentProposal("column", "Team", "City"),
                                          AlignmentProposal("row", 0, 3),
                                          AlignmentProposal("diagonal", 0, 0)])
    assert refined == a
