from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from raxon.ingest import DatasetStats
from raxon.planner import (
    QMatrix,
    build_qmatrix,
    estimate_card,
    generate_subplans,
    pairwise_distances,
    plan_patterns,
    reorder_subplans,
)
from raxon.sparql import Constant, TriplePattern, Variable

V = Variable
K = Constant
TYPE, P, Q, STUDENT = 1, 2, 3, 4
STATS = DatasetStats(total_triples=1000, distinct_subjects=50,
                     property_card={TYPE: 120, P: 500, Q: 7}, class_card={STUDENT: 99_000})


def tp(s, p, o):
    return TriplePattern(s, p, o)


def test_card_rules():
    assert estimate_card(tp(V("x"), K(TYPE), K(STUDENT)), STATS, TYPE) == 99_000
    assert estimate_card(tp(V("x"), K(P), V("y")), STATS, TYPE) == 500
    assert estimate_card(tp(K(9), K(P), V("o")), STATS, TYPE) == 1
    assert estimate_card(tp(K(9), K(P), K(10)), STATS, TYPE) == 1
    assert estimate_card(tp(V("x"), K(P), K(10)), STATS, TYPE) == 500 / 50
    assert estimate_card(tp(V("x"), K(Q), K(10)), STATS, TYPE) == 1  # 7/50 clamps to 1
    assert estimate_card(tp(V("a"), V("p"), V("b")), STATS, TYPE) == 1000
    assert estimate_card(tp(K(9), V("p"), V("b")), STATS, TYPE) == 1000


def test_card_unknown_property():
    assert estimate_card(tp(V("x"), K(77), V("y")), STATS) == 0
    assert estimate_card(tp(V("x"), K(77), K(5)), STATS) == 1
    # unknown class under rdf:type uses the exact (zero) count
    assert estimate_card(tp(V("x"), K(TYPE), K(99)), STATS, TYPE) == 0


def test_qmatrix_single_and_block_diagonal():
    qm = build_qmatrix([tp(V("x"), K(Q), V("y"))], STATS)
    assert qm.values.tolist() == [[7, 7]]
    qm = build_qmatrix([tp(V("x"), K(Q), V("y")), tp(V("a"), K(P), V("b"))], STATS)
    assert qm.nodes == [V("x"), V("y"), V("a"), V("b")]
    assert qm.values.tolist() == [[7, 7, 0, 0], [0, 0, 500, 500]]


def _qm(rows):
    arr = np.asarray(rows, dtype=float)
    return QMatrix([None] * len(arr), list(range(arr.shape[1])), arr)


def test_pairwise_distances():
    assert pairwise_distances(_qm([[3, 0], [0, 4]])) == [(0, 1, 5.0)]
    pairs = pairwise_distances(_qm([[1, 1], [9, 9], [1, 1]]))
    assert pairs[0] == (0, 2, 0.0)
    assert len(pairwise_distances(_qm(np.eye(5)))) == 10
    # ties fall back to index order
    assert [p[:2] for p in pairwise_distances(_qm(np.eye(3)))] == [(0, 1), (0, 2), (1, 2)]


def test_generate_subplans_examples():
    assert generate_subplans([(0, 1, 1.0)], [9, 5]) == [[1, 0]]
    assert generate_subplans([(0, 1, 1.0)], [5, 9]) == [[0, 1]]
    # indices 1,2 closest, then 0 joins their sub-plan
    pairs = [(1, 2, 0.5), (0, 1, 1.0), (0, 2, 2.0)]
    assert generate_subplans(pairs, [1, 8, 3]) == [[2, 1, 0]]
    clusters = [(0, 1, 0.1), (2, 3, 0.2), (0, 2, 50.0), (0, 3, 51), (1, 2, 52), (1, 3, 53)]
    assert generate_subplans(clusters, [1, 2, 3, 4]) == [[0, 1], [2, 3]]


def test_generate_subplans_skips_pairs_already_placed():
    pairs = [(0, 1, 0.1), (2, 3, 0.2), (1, 2, 0.3), (0, 4, 0.4)]
    assert generate_subplans(pairs, [1] * 5) == [[0, 1, 4], [2, 3]]


def test_reorder_subplans_examples():
    a = tp(V("x"), K(P), V("y"))
    b = tp(V("u"), K(P), V("v"))
    c = tp(V("y"), K(Q), V("z"))
    pats = [a, b, c]
    assert reorder_subplans([[0, 1, 2]], pats) == [0, 1, 2]
    assert reorder_subplans([[0], [1, 2]], pats) == [0, 2, 1]
    d = tp(V("m"), K(P), V("n"))
    assert reorder_subplans([[0], [3]], pats + [d]) == [0, 3]


def test_reorder_pulls_forward_recursively():
    # x-y pulls y-z forward (shares y), which then pulls z-w (shares z)
    pats = [
        tp(V("x"), K(P), V("y")),
        tp(V("q"), K(P), V("r")),
        tp(V("y"), K(Q), V("z")),
        tp(V("z"), K(Q), V("w")),
    ]
    assert reorder_subplans([[0], [1, 2, 3]], pats) == [0, 2, 3, 1]


def test_single_pattern_bypasses_planner():
    trace = plan_patterns([tp(V("x"), K(P), V("y"))], STATS)
    assert trace.order == [0]
    assert trace.pairs == []


_nodes = st.one_of(st.sampled_from([V(n) for n in "abcdefg"]), st.integers(0, 5).map(K))
_patterns = st.lists(st.builds(tp, _nodes, st.sampled_from([K(TYPE), K(P), K(Q), K(8)]), _nodes),
                     min_size=1, max_size=14)


@settings(max_examples=150, deadline=None)
@given(_patterns)
def test_plan_is_a_deterministic_permutation(patterns):
    trace = plan_patterns(patterns, STATS, TYPE)
    assert sorted(trace.order) == list(range(len(patterns)))
    assert plan_patterns(patterns, STATS, TYPE).order == trace.order
    n = len(patterns)
    if n > 1:
        assert len(trace.pairs) == math.comb(n, 2)
        assert all(a < b for a, b, _ in trace.pairs)
        flat = [i for sp in trace.subplans for i in sp]
        assert sorted(flat) == list(range(n))
    for i, t in enumerate(patterns):
        row = trace.qmatrix.values[i]
        card = estimate_card(t, STATS, TYPE)
        for node, v in zip(trace.qmatrix.nodes, row):
            assert v == (card if node in (t.s, t.o) else 0)
