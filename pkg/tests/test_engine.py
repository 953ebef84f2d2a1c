from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import nt
from raxon.engine import (
    TablePermutation,
    decompose,
    enumerate_permutations,
    execute,
    hash_join,
    match_tables,
    run_query,
)
from raxon.gen import generate, generate_queries
from raxon.ingest import parse_ntriples
from raxon.oracle import oracle_execute
from raxon.pipeline import build_database
from raxon.sparql import Constant, Variable, parse_query
from raxon.storage import Catalog, EcsIndex, TableMeta


def _bgp(body: str, select: str = "*"):
    return parse_query(f"SELECT {select} WHERE {{ {body} }}")


def _meta(tid, cols, residual=False):
    return TableMeta(tid, tuple(cols), (), 1, residual, None if residual else tid, ())


# -- decomposition ---------------------------------------------------------------------

def test_decompose_star():
    g = decompose(_bgp("?x <p1> ?a . ?x <p2> ?b . ?x <p3> <c>"))
    assert len(g.nodes) == 1
    assert g.join_edges == [] and g.aux_equalities == []


def test_decompose_chain():
    g = decompose(_bgp("?a <p1> ?b . ?b <p2> ?c"))
    assert len(g.nodes) == 2
    assert [(e.source, e.target) for e in g.join_edges] == [(0, 1)]


def test_decompose_object_object_share():
    g = decompose(_bgp("?a <p1> ?v . ?b <p2> ?v"))
    assert len(g.nodes) == 2
    assert g.join_edges == []
    assert [(a.var, a.members) for a in g.aux_equalities] == [("v", (0, 1))]


def test_decompose_constant_subject_is_its_own_query_cs():
    g = decompose(_bgp("<s> <p1> ?v . ?x <p2> <s>"))
    assert [n.subject for n in g.nodes][0] == Constant(parse_query("SELECT * { <s> <p> ?o }").patterns[0].s.value)
    assert g.join_edges == []


# -- matching and permutations ---------------------------------------------------------------

def test_match_tables_superset_rule():
    catalog = Catalog([_meta(0, [1, 2]), _meta(1, [2]), _meta(2, [1, 2, 3], residual=True)])
    g = decompose([_tp("x", 1, "a")])
    assert match_tables(g.nodes[0], catalog) == [0, 2]
    g = decompose([_tp("x", 1, "a"), _tp("x", 2, "b")])
    assert match_tables(g.nodes[0], catalog) == [0, 2]
    g = decompose([_tp("x", 3, "a"), _tp("x", 4, "b")])
    assert match_tables(g.nodes[0], catalog) == []


def _tp(s, p, o):
    from raxon.sparql import TriplePattern
    return TriplePattern(Variable(s), Constant(p), Variable(o))


def chain3():
    return decompose([_tp("a", 1, "b"), _tp("b", 2, "c"), _tp("c", 3, "d")])


def test_worked_permutation_example():
    c1, c2, c3, c4, c5 = 1, 2, 3, 4, 5
    ecs = EcsIndex(frozenset({(c1, 1, c3), (c2, 1, c3), (c3, 2, c4), (c3, 2, c5)}))
    perms = enumerate_permutations(chain3(), [[c1, c2], [c3], [c4, c5]], ecs)
    assert [p.assignment for p in perms] == [(c1, c3, c4), (c1, c3, c5), (c2, c3, c4), (c2, c3, c5)]


def test_permutation_pruning_and_trivial_cases():
    g = decompose([_tp("a", 1, "b")])
    assert enumerate_permutations(g, [[4, 7]], EcsIndex(frozenset())) == [
        TablePermutation((4,)), TablePermutation((7,))]
    assert enumerate_permutations(chain3(), [[1], [2], [3]], EcsIndex(frozenset())) == []
    # without pruning the full product comes back, in lexicographic order
    perms = enumerate_permutations(chain3(), [[2, 1], [3], [5, 4]], None)
    assert [p.assignment for p in perms] == [(1, 3, 4), (1, 3, 5), (2, 3, 4), (2, 3, 5)]
    # one missing link removes exactly the permutations that need it
    ecs = EcsIndex(frozenset({(1, 1, 3), (3, 2, 4), (3, 2, 5)}))
    perms = enumerate_permutations(chain3(), [[1, 2], [3], [4, 5]], ecs)
    assert [p.assignment for p in perms] == [(1, 3, 4), (1, 3, 5)]


# -- hash join --------------------------------------------------------------------------------

def test_hash_join_order(backend):
    left = np.array([5, 1, 5, 2], dtype=np.int64)
    right = np.array([5, 5, 3, 1, 5], dtype=np.int64)
    li, ri = hash_join(left, right)
    expected = [(i, j) for i in range(len(left)) for j in range(len(right)) if left[i] == right[j]]
    assert list(zip(li.tolist(), ri.tolist())) == expected
    li, ri = hash_join(right, left)
    expected = [(i, j) for i in range(len(right)) for j in range(len(left)) if right[i] == left[j]]
    assert list(zip(li.tolist(), ri.tolist())) == expected


# -- execution ------------------------------------------------------------------------------------

DATA = nt(
    "<a> <p> <b> .",
    "<a> <q> \"x\" .",
    "<b> <p> <c> .",
    "<b> <p> <d> .",
    "<b> <q> \"y\" .",
    "<c> <r> \"z\" .",
    "<d> <p> <a> .",
    "<d> <p> <d> .",
    "<e> <p> <a> .",
)


@pytest.fixture(params=[0.0, 0.5, 1.0])
def db(request):
    parsed = parse_ntriples(DATA)
    return parsed, build_database(parsed, m=request.param)[0]


def _decoded(rs, dictionary):
    return sorted(tuple(r) for r in rs.decoded(dictionary))


def test_execute_on_empty_db():
    parsed = parse_ntriples(b"")
    db, _ = build_database(parsed)
    rs = execute(_bgp("?x <p> ?y"), db)
    assert len(rs) == 0 and rs.header == ["x", "y"]


@pytest.mark.parametrize("body,select", [
    ("?x <p> ?y", "*"),
    ("?x <p> ?y . ?y <p> ?z", "*"),
    ("?x <p> ?y . ?x <q> ?v", "*"),
    ("?x <p> ?x", "*"),
    ("<b> <p> ?o", "*"),
    ("?s <p> <a>", "*"),
    ("?x <p> ?y . ?y <p> ?z . ?z <p> ?x", "*"),
    ("?x <p> ?v . ?y <p> ?v", "*"),
    ("?x <p> ?y . ?y <r> ?z", "?x"),
    ("?x <p> ?y . ?y <p> ?z", "?z"),
    ("<a> <p> <b>", "*"),
    ("<a> <p> <zzz>", "*"),
    ("?x <unknown> ?y", "*"),
])
def test_execute_matches_oracle(db, body, select):
    parsed, database = db
    bgp = _bgp(body, select)
    want = oracle_execute(bgp, parsed.triples, parsed.dictionary)
    for planner in ("none", "distance"):
        for pruning in (True, False):
            got = execute(bgp, database, planner=planner, ecs_pruning=pruning)
            assert got.multiset() == want.multiset()
            assert got.header == want.header


def test_execute_known_results(db):
    parsed, database = db
    rs = execute(_bgp("?x <p> ?y . ?y <p> ?z"), database)
    assert _decoded(rs, parsed.dictionary) == sorted([
        ("<a>", "<b>", "<c>"), ("<a>", "<b>", "<d>"), ("<b>", "<d>", "<a>"), ("<b>", "<d>", "<d>"),
        ("<d>", "<a>", "<b>"), ("<d>", "<d>", "<a>"), ("<d>", "<d>", "<d>"), ("<e>", "<a>", "<b>"),
    ])
    # bag semantics on projection
    rs = execute(_bgp("?x <p> ?y", "?x"), database)
    assert sorted(r[0] for r in rs.decoded(parsed.dictionary)).count("<b>") == 2
    rs = execute(_bgp("<a> <p> <b>"), database)
    assert rs.rows.shape == (1, 0)


def test_not_null_keeps_only_base_rows():
    # base {p,q} with 4 subjects, ancestor {p} with 1 subject, merged at m=0.5
    lines = [f"<s{i}> <p> \"{i}\" ." for i in range(5)] + [f"<s{i}> <q> \"{i}\" ." for i in range(4)]
    parsed = parse_ntriples(nt(*lines))
    db, report = build_database(parsed, m=0.5)
    assert report.tables == 1
    assert len(execute(_bgp("?x <p> ?a . ?x <q> ?b"), db)) == 4
    assert len(execute(_bgp("?x <p> ?a"), db)) == 5


def test_multi_valued_cells_filter_and_join():
    parsed = parse_ntriples(nt(
        "<s> <tag> <t1> .", "<s> <tag> <t2> .", "<t2> <label> \"two\" .", "<u> <tag> <t2> ."))
    db, _ = build_database(parsed, m=0.0)
    assert len(execute(_bgp("?x <tag> <t2>"), db)) == 2
    rs = execute(_bgp("?x <tag> ?t . ?t <label> ?l"), db)
    assert _decoded(rs, parsed.dictionary) == [("<s>", "<t2>", '"two"'), ("<u>", "<t2>", '"two"')]


def test_parallel_matches_sequential():
    corpus = generate(shape="bipartite", subjects=300, seed=5)
    parsed = parse_ntriples(corpus.ntriples())
    db, _ = build_database(parsed, m=0.0)
    bgp = _bgp("?a <http://example.org/p/link> ?b . ?b <http://example.org/p/name> ?n")
    seq, t1 = run_query(bgp, db)
    par, t2 = run_query(bgp, db, parallel=True)
    assert len(t1.permutations) > 1
    assert np.array_equal(seq.rows, par.rows)
    assert t1.row_counts == t2.row_counts


def test_permutation_results_are_disjoint():
    corpus = generate(shape="diamond", subjects=400, seed=9)
    parsed = parse_ntriples(corpus.ntriples())
    db, _ = build_database(parsed, m=0.0)
    bgp = _bgp("?a <http://example.org/p/link> ?b . ?b <http://example.org/p/name> ?n")
    rs, trace = run_query(bgp, db)
    seen = set()
    start = 0
    for n in trace.row_counts:
        block = {(r[0], r[1]) for r in rs.rows[start:start + n].tolist()}
        assert not (block & seen)
        seen |= block
        start += n


def test_oracle_small_cases():
    parsed = parse_ntriples(nt("<a> <p> <b> .", "<c> <p> <b> .", "<d> <p> <e> ."))
    rs = oracle_execute(_bgp("<a> <p> <b>"), parsed.triples, parsed.dictionary)
    assert rs.rows.shape == (1, 0)
    rs = oracle_execute(_bgp("?x <p> ?y"), parsed.triples, parsed.dictionary)
    assert len(rs) == 3


@pytest.fixture(scope="module")
def corpus_db():
    corpus = generate(shape="diamond", subjects=600, seed=11)
    parsed = parse_ntriples(corpus.ntriples())
    return corpus, parsed, {m: build_database(parsed, m=m)[0] for m in (0.0, 0.3, 1.0)}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["star", "chain", "chain-star", "cyclic"]))
def test_generated_queries_match_both_oracles(corpus_db, seed, kind):
    corpus, parsed, dbs = corpus_db
    ((_, text),) = generate_queries(corpus, per_kind=1, seed=seed, kinds=(kind,))
    bgp = parse_query(text)
    want = oracle_execute(bgp, parsed.triples, parsed.dictionary)
    assert want.multiset() == oracle_execute(bgp, parsed.triples, parsed.dictionary, indexed=False).multiset()
    m = random.Random(seed).choice(sorted(dbs))
    assert execute(bgp, dbs[m]).multiset() == want.multiset()
