from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cs, make_css
from merge_oracle import candidates, exact_plan_cost, exhaustive_min, random_instance
from raxon.cs import build_closure, extract_cs
from raxon.errors import EnumerationBudgetExceeded, MergeError
from raxon.gen import generate
from raxon.ingest import parse_ntriples
from raxon.merge import (
    AncestralSubgraph,
    DensityConfig,
    MergePlan,
    build_residual,
    classify_dense,
    dense_coverage,
    enumerate_assignments,
    greedy_merge,
    no_merge,
    optimal_merge,
    plan_cost,
    plan_merge,
    r_null,
    split_components,
    subgraph_null_ratio,
)

A, B, C, D, E, F = range(1, 7)


def three_dense_hierarchy():
    """c2={a}, c4={a,b}, c5={a,c} non-dense; c6={a,b,c,d}, c7={a,b,e}, c8={a,f} dense."""
    layout = {2: {A}, 4: {A, B}, 5: {A, C}, 6: {A, B, C, D}, 7: {A, B, E}, 8: {A, F}}
    css = [make_cs(i, props, 10 if i < 6 else 100) for i, props in layout.items()]
    return css, {6, 7, 8}


# -- density -------------------------------------------------------------------

def test_density_config_range():
    DensityConfig(0.0)
    DensityConfig(1.0)
    for bad in (-0.01, 1.01, float("nan")):
        with pytest.raises(ValueError):
            DensityConfig(bad)


def test_classify_dense_boundaries():
    css = make_css([({A}, 1000), ({B}, 251), ({C}, 250), ({D}, 1)])
    assert classify_dense(css, DensityConfig(0.0)) == {0, 1, 2, 3}
    assert classify_dense(css, DensityConfig(1.0)) == set()
    assert classify_dense(css, DensityConfig(0.25)) == {0, 1}


# -- cost model ------------------------------------------------------------------

@pytest.mark.parametrize("parent,child,expected", [
    (({A}, 10), ({A, B}, 10), 1.0),
    (({A, B}, 100), ({A, B, C}, 50), 2.0),
    (({A}, 5), ({A, B, C, D}, 500), 0.03),
])
def test_r_null(parent, child, expected):
    p, c = make_css([parent, child])
    assert r_null(p, c) == pytest.approx(expected, rel=1e-15)


def test_r_null_requires_strict_ancestor():
    p, c = make_css([({A, B}, 1), ({A, C}, 1)])
    with pytest.raises(MergeError):
        r_null(p, c)
    with pytest.raises(MergeError):
        r_null(p, p)


def test_subgraph_null_ratio():
    css = make_css([({A, B, C}, 100), ({A}, 10), ({A, B}, 20)])
    assert subgraph_null_ratio(AncestralSubgraph(0), css) == 0.0
    assert subgraph_null_ratio(AncestralSubgraph(0, frozenset({1, 2})), css) == pytest.approx(40 / 130)
    css = make_css([({A, B, C}, 50), ({A}, 10)])
    assert subgraph_null_ratio(AncestralSubgraph(0, frozenset({1})), css) == pytest.approx(20 / 60)


def test_plan_cost_sums_groups():
    css = make_css([({A, B}, 3), ({A}, 1), ({C, D}, 1), ({C}, 1), ({E}, 7)])
    plan = MergePlan([AncestralSubgraph(0, frozenset({1})), AncestralSubgraph(2, frozenset({3}))],
                     frozenset({4}))
    report = plan_cost(plan, css)
    assert report.per_group == {0: 0.25, 2: 0.5}
    assert report.total == 0.75
    assert plan_cost(no_merge(css), css).total == 0.0


def test_chain_with_dense_sink_costs_its_group():
    css = make_css([({A}, 5), ({A, B}, 7), ({A, B, C}, 100)])
    plan = optimal_merge(build_closure(css), css, {2})
    (g,) = plan.groups
    assert g == AncestralSubgraph(2, frozenset({0, 1}))
    assert plan_cost(plan, css).total == pytest.approx((2 * 5 + 1 * 7) / 112)


# -- components and enumeration -----------------------------------------------------

def test_split_components_no_dense_and_all_dense():
    css = make_css([({A}, 1), ({A, B}, 1), ({C}, 1)])
    closure = build_closure(css)
    comps = split_components(closure, set())
    assert [c.nodes for c in comps] == [[0, 1], [2]]
    comps = split_components(closure, {0, 1, 2})
    assert [c.nodes for c in comps] == [[0], [1], [2]]


def test_three_dense_hierarchy_has_six_assignments():
    css, dense = three_dense_hierarchy()
    comps = split_components(build_closure(css), dense)
    assert len(comps) == 1
    (comp,) = comps
    assert comp.nodes == [2, 4, 5, 6, 7, 8]
    assert comp.candidates == {2: [6, 7, 8], 4: [6, 7], 5: [6]}
    assignments = list(enumerate_assignments(comp))
    assert len(assignments) == 6 == comp.assignment_count()
    assert len({tuple(sorted(a.items())) for a in assignments}) == 6


def test_enumerate_trivial_cases():
    css = make_css([({A, B}, 5)])
    (comp,) = split_components(build_closure(css), {0})
    assert list(enumerate_assignments(comp)) == [{}]
    css = make_css([({A}, 1), ({A, B}, 5), ({A, C}, 5)])
    (comp,) = split_components(build_closure(css), {1, 2})
    assert list(enumerate_assignments(comp)) == [{0: 1}, {0: 2}]


def test_dense_to_dense_edges_are_cut():
    css = make_css([({A}, 50), ({A, B}, 50)])
    comps = split_components(build_closure(css), {0, 1})
    assert [c.nodes for c in comps] == [[0], [1]]
    plan = optimal_merge(build_closure(css), css, {0, 1})
    assert plan.groups == [AncestralSubgraph(0), AncestralSubgraph(1)]


# -- optimal ---------------------------------------------------------------------------

def cross_instance():
    # k0={b,c}(10), k1={c}(2), d2={b,c,d,e}(100), d3={b,c,f}(50)
    return make_css([({B, C}, 10), ({C}, 2), ({B, C, D, E}, 100), ({B, C, F}, 50)]), {2, 3}


def test_optimal_prefers_cross_assignment(backend):
    css, dense = cross_instance()
    plan = optimal_merge(build_closure(css), css, dense)
    assert plan.groups == [AncestralSubgraph(2, frozenset({1})), AncestralSubgraph(3, frozenset({0}))]
    best, count = exhaustive_min(css, dense)
    assert count == 4
    assert best == Fraction(23, 102)
    assert exact_plan_cost(plan, css) == best


def test_greedy_on_cross_instance_is_worse(backend):
    css, dense = cross_instance()
    plan = greedy_merge(build_closure(css), css, dense)
    # k0 ties at 0.2 and goes to the larger base; k1 prefers d2 (0.06 < 0.08)
    assert plan.groups == [AncestralSubgraph(2, frozenset({0, 1})), AncestralSubgraph(3)]
    assert exact_plan_cost(plan, css) == Fraction(13, 56)
    assert plan.evaluations == 4


def test_optimal_memberless_dense():
    css = make_css([({A, B}, 10), ({C}, 1)])
    plan = optimal_merge(build_closure(css), css, {0})
    assert plan.groups == [AncestralSubgraph(0)]
    assert plan.residual == {1}


def test_optimal_budget_guard():
    css, dense = three_dense_hierarchy()
    with pytest.raises(EnumerationBudgetExceeded) as exc:
        optimal_merge(build_closure(css), css, dense, budget=5)
    assert exc.value.needed == 6
    assert "greedy" in str(exc.value)
    optimal_merge(build_closure(css), css, dense, budget=6)


# -- greedy ---------------------------------------------------------------------------

def test_greedy_picks_lowest_r_null(backend):
    css = make_css([({A}, 10), ({A, B}, 100), ({A, B, C}, 20)])
    plan = greedy_merge(build_closure(css), css, {1, 2})
    assert plan.groups == [AncestralSubgraph(1, frozenset({0})), AncestralSubgraph(2)]


def test_greedy_tie_break_larger_base_then_smaller_id(backend):
    # both candidates give r_null = 1 * 10 / 10
    css = make_css([({A}, 10), ({A, B}, 10), ({A, C}, 10)])
    plan = greedy_merge(build_closure(css), css, {1, 2})
    assert plan.groups[0] == AncestralSubgraph(1, frozenset({0}))
    # equal ratio 2*10/40 == 1*10/20 but the larger base wins
    css = make_css([({A}, 10), ({A, B}, 20), ({A, C, D}, 40)])
    plan = greedy_merge(build_closure(css), css, {1, 2})
    assert AncestralSubgraph(2, frozenset({0})) in plan.groups


def test_greedy_empty_dense_all_residual():
    css = make_css([({A}, 1), ({A, B}, 2)])
    plan = greedy_merge(build_closure(css), css, set())
    assert plan.groups == []
    assert plan.residual == {0, 1}


def test_greedy_equals_optimal_with_single_candidates(backend):
    css = make_css([({A}, 3), ({A, B}, 50), ({C}, 4), ({C, D}, 60), ({E}, 2)])
    closure = build_closure(css)
    g = greedy_merge(closure, css, {1, 3})
    o = optimal_merge(closure, css, {1, 3})
    assert g.groups == o.groups
    assert g.residual == o.residual == {4}


# -- residual and coverage ---------------------------------------------------------------

def test_build_residual():
    css = make_css([({A}, 2), ({B}, 3)])
    assert build_residual(set(), css) is None
    r = build_residual({0, 1}, css)
    assert r.columns == {A, B}
    assert r.row_count == 5
    assert r.null_cells == 5


def test_m_one_puts_everything_in_residual():
    css = make_css([({A}, 5), ({A, B}, 9), ({C}, 9)])
    for algo in ("greedy", "optimal"):
        plan = plan_merge(css, build_closure(css), 1.0, algo)
        assert plan.groups == []
        assert plan.residual == {0, 1, 2}
        assert plan.table_count == 1
        assert dense_coverage(plan, css) == 0.0


def test_dense_coverage():
    css = make_css([({A}, 77), ({B}, 23)])
    assert dense_coverage(no_merge(css), css) == 1.0
    plan = MergePlan([AncestralSubgraph(0)], frozenset({1}))
    assert dense_coverage(plan, css) == pytest.approx(0.77)
    assert dense_coverage(plan_merge(css, build_closure(css), 0.0), css) == 1.0


def test_plan_validate_detects_overlap():
    plan = MergePlan([AncestralSubgraph(0, frozenset({1}))], frozenset({1}))
    with pytest.raises(MergeError):
        plan.validate([0, 1])
    with pytest.raises(MergeError):
        MergePlan([AncestralSubgraph(0)], frozenset()).validate([0, 1])


# -- properties -------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_optimal_matches_exhaustive_and_greedy_dominates(seed):
    css, dense = random_instance(random.Random(seed))
    closure = build_closure(css)
    best, _ = exhaustive_min(css, dense)
    opt = optimal_merge(closure, css, dense)
    gre = greedy_merge(closure, css, dense)
    ids = [c.cs_id for c in css]
    opt.validate(ids)
    gre.validate(ids)
    assert exact_plan_cost(opt, css) == best
    assert exact_plan_cost(gre, css) >= best
    cand = candidates(css, dense)
    assert gre.evaluations == sum(len(v) for v in cand.values())
    if all(len(v) == 1 for v in cand.values()):
        assert exact_plan_cost(gre, css) == best


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["chain", "diamond", "bipartite"]), st.integers(0, 1000))
def test_plans_valid_and_table_count_monotone(shape, seed):
    corpus = generate(shape=shape, subjects=300, seed=seed)
    parsed = parse_ntriples(corpus.ntriples())
    css = extract_cs(parsed.triples)
    closure = build_closure(css)
    ids = [c.cs_id for c in css]
    for algo in ("greedy", "optimal", "none"):
        counts = []
        for m in (0.0, 0.05, 0.25, 0.5, 1.0):
            plan = plan_merge(css, closure, m, algo)
            plan.validate(ids)
            counts.append(plan.table_count)
        if algo != "none":
            assert counts == sorted(counts, reverse=True)
            assert counts[0] == len(css) and counts[-1] == 1
        else:
            assert counts == [len(css)] * 5


def test_greedy_uses_exact_ratio_comparison(backend):
    # 1*1/3 and 2*1/6 are equal as rationals; a float comparison could split them
    css = make_css([({A}, 1), ({A, B}, 3), ({A, C, D}, 6)])
    plan = greedy_merge(build_closure(css), css, {1, 2})
    assert AncestralSubgraph(2, frozenset({0})) in plan.groups
