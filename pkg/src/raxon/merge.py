"""Dense-CS selection, the NULL cost model and merge planning."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from . import kernels
from .cs import CharacteristicSet, InferredHierarchy, index_css
from .errors import EnumerationBudgetExceeded, MergeError

DEFAULT_ENUM_BUDGET = 10**7
ALGORITHMS = ("greedy", "optimal", "none")

CSIndex = Union[Mapping[int, CharacteristicSet], Sequence[CharacteristicSet]]


def _as_index(css: CSIndex) -> Mapping[int, CharacteristicSet]:
    return css if isinstance(css, Mapping) else index_css(css)


@dataclass(frozen=True)
class DensityConfig:
    m: float

    def __post_init__(self):
        if not isinstance(self.m, (int, float)) or math.isnan(self.m) or not 0.0 <= self.m <= 1.0:
            raise ValueError(f"density factor must lie in [0, 1], got {self.m!r}")


@dataclass(frozen=True)
class AncestralSubgraph:
    base: int
    members: frozenset[int] = frozenset()


@dataclass
class MergePlan:
    groups: list[AncestralSubgraph]
    residual: frozenset[int]
    config: Optional[DensityConfig] = None
    algorithm: str = "none"
    # greedy: candidate evaluations; optimal: assignments visited
    evaluations: int = 0

    @property
    def table_count(self) -> int:
        return len(self.groups) + (1 if self.residual else 0)

    def covered(self) -> set[int]:
        out: set[int] = set()
        for g in self.groups:
            out.add(g.base)
            out |= g.members
        return out

    def validate(self, cs_ids: Iterable[int]) -> None:
        """Check that bases, members and residual partition ``cs_ids``."""
        seen: dict[int, str] = {}

        def claim(cid, where):
            if cid in seen:
                raise MergeError(f"CS {cid} appears in {seen[cid]} and {where}")
            seen[cid] = where

        for g in self.groups:
            claim(g.base, f"base of {g.base}")
            for mem in g.members:
                claim(mem, f"members of {g.base}")
        for cid in self.residual:
            claim(cid, "residual")
        expected = set(cs_ids)
        if set(seen) != expected:
            missing = sorted(expected - set(seen))
            extra = sorted(set(seen) - expected)
            raise MergeError(f"plan does not cover the CS set (missing={missing}, unknown={extra})")


@dataclass
class CostReport:
    per_group: dict[int, float]
    total: float


def classify_dense(css: Sequence[CharacteristicSet], config: DensityConfig) -> set[int]:
    """CSs with strictly more records than ``m`` times the largest CS."""
    if not css:
        return set()
    threshold = config.m * max(c.n for c in css)
    return {c.cs_id for c in css if c.n > threshold}


def r_null(parent: CharacteristicSet, child: CharacteristicSet) -> float:
    """NULL ratio of merging ``parent`` into its descendant ``child``."""
    if not parent.properties < child.properties:
        raise MergeError(f"CS {parent.cs_id} is not a strict ancestor of CS {child.cs_id}")
    return len(child.properties - parent.properties) * parent.n / child.n


def subgraph_null_ratio(group: AncestralSubgraph, css: CSIndex) -> float:
    idx = _as_index(css)
    if not group.members:
        return 0.0
    base = idx[group.base]
    num = 0
    den = base.n
    for mid in sorted(group.members):
        mem = idx[mid]
        num += len(base.properties - mem.properties) * mem.n
        den += mem.n
    return num / den


def plan_cost(plan: MergePlan, css: CSIndex) -> CostReport:
    """Sum of per-group NULL ratios; the residual table carries no cost."""
    idx = _as_index(css)
    per = {g.base: subgraph_null_ratio(g, idx) for g in plan.groups}
    return CostReport(per, math.fsum(per.values()))


@dataclass
class Component:
    nodes: list[int]
    dense: list[int]
    non_dense: list[int]
    # non-dense node -> dense descendants inside the component
    candidates: dict[int, list[int]] = field(default_factory=dict)

    @property
    def assignable(self) -> list[int]:
        return [k for k in self.non_dense if self.candidates.get(k)]

    @property
    def unassignable(self) -> list[int]:
        return [k for k in self.non_dense if not self.candidates.get(k)]

    def assignment_count(self) -> int:
        return math.prod(len(self.candidates[k]) for k in self.assignable)


def split_components(closure: InferredHierarchy, dense: Iterable[int]) -> list[Component]:
    """Cut every edge leaving a dense node and return the weak components."""
    dense = set(dense)
    parent = {n: n for n in closure.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    src, dst = closure.src, closure.dst
    if len(src):
        keep = ~np.isin(src, np.fromiter(dense, dtype=np.int64, count=len(dense)))
        for a, b in zip(src[keep].tolist(), dst[keep].tolist()):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        kept_src, kept_dst = src[keep].tolist(), dst[keep].tolist()
    else:
        kept_src, kept_dst = [], []
    members: dict[int, list[int]] = {}
    for n in closure.nodes:
        members.setdefault(find(n), []).append(n)
    comps = {
        root: Component(sorted(ns), sorted(n for n in ns if n in dense), sorted(n for n in ns if n not in dense))
        for root, ns in members.items()
    }
    for a, b in zip(kept_src, kept_dst):
        if b in dense:
            comps[find(a)].candidates.setdefault(a, []).append(b)
    for c in comps.values():
        for k in c.candidates:
            c.candidates[k].sort()
    return sorted(comps.values(), key=lambda c: c.nodes[0])


def enumerate_assignments(component: Component) -> Iterator[dict[int, int]]:
    """Every mapping of assignable non-dense nodes to one dense descendant."""
    ks = component.assignable
    for combo in itertools.product(*(component.candidates[k] for k in ks)):
        yield dict(zip(ks, combo))


def _groups_from(dense: Iterable[int], assignment: Mapping[int, int]) -> list[AncestralSubgraph]:
    members: dict[int, set[int]] = {d: set() for d in dense}
    for k, d in assignment.items():
        members[d].add(k)
    return [AncestralSubgraph(d, frozenset(members[d])) for d in sorted(members)]


def optimal_merge(
    closure: InferredHierarchy,
    css: CSIndex,
    dense: Iterable[int],
    budget: int = DEFAULT_ENUM_BUDGET,
    config: Optional[DensityConfig] = None,
) -> MergePlan:
    """Exhaustive minimum-cost assignment, solved per connected component."""
    idx = _as_index(css)
    comps = split_components(closure, dense)
    for comp in comps:
        needed = comp.assignment_count()
        if comp.dense and needed > budget:
            raise EnumerationBudgetExceeded(needed, budget)
    groups: list[AncestralSubgraph] = []
    residual: set[int] = set()
    visited_total = 0
    for comp in comps:
        if not comp.dense:
            residual.update(comp.nodes)
            continue
        residual.update(comp.unassignable)
        ks = comp.assignable
        local = {d: i for i, d in enumerate(comp.dense)}
        ptr = [0]
        dense_idx: list[int] = []
        weight: list[float] = []
        for k in ks:
            pk = idx[k]
            for d in comp.candidates[k]:
                dense_idx.append(local[d])
                weight.append(float(len(idx[d].properties - pk.properties) * pk.n))
            ptr.append(len(dense_idx))
        best, visited, _ = kernels.optimal_search(
            np.asarray(ptr, dtype=np.int64),
            np.asarray(dense_idx, dtype=np.int64),
            np.asarray(weight, dtype=np.float64),
            np.asarray([idx[k].n for k in ks], dtype=np.float64),
            np.asarray([idx[d].n for d in comp.dense], dtype=np.float64),
        )
        visited_total += visited
        assignment = {k: comp.dense[dense_idx[c]] for k, c in zip(ks, best.tolist())}
        groups.extend(_groups_from(comp.dense, assignment))
    groups.sort(key=lambda g: g.base)
    return MergePlan(groups, frozenset(residual), config, "optimal", visited_total)


def greedy_merge(
    closure: InferredHierarchy,
    css: CSIndex,
    dense: Iterable[int],
    config: Optional[DensityConfig] = None,
) -> MergePlan:
    """Assign each non-dense CS to the dense descendant with the lowest r_null.

    Cardinalities are the original ones for every decision.  Ties prefer the
    dense candidate with more records, then the smaller CS id.
    """
    idx = _as_index(css)
    dense = set(dense)
    all_ids = sorted(idx)
    non_dense = [c for c in all_ids if c not in dense]
    dense_arr = np.fromiter(sorted(dense), dtype=np.int64, count=len(dense))
    src, dst = closure.src, closure.dst
    if len(src) and len(dense_arr):
        mask = np.isin(dst, dense_arr) & ~np.isin(src, dense_arr)
        src, dst = src[mask], dst[mask]
    else:
        src = dst = np.empty(0, np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    k_arr = np.asarray(non_dense, dtype=np.int64)
    ptr = np.concatenate(([0], np.searchsorted(src, k_arr, side="right"))).astype(np.int64)
    # searchsorted on the sorted sources gives the end of each k's block
    starts = np.searchsorted(src, k_arr, side="left")
    if len(k_arr) and not np.array_equal(starts, ptr[:-1]):
        # nodes absent from src leave gaps only if src holds ids outside k_arr
        raise MergeError("closure edges reference unknown CS ids")
    sizes = {c: len(idx[c].properties) for c in all_ids}
    counts = {c: idx[c].n for c in all_ids}
    src_sizes = np.fromiter((sizes[s] for s in src.tolist()), dtype=np.int64, count=len(src))
    dst_sizes = np.fromiter((sizes[d] for d in dst.tolist()), dtype=np.int64, count=len(dst))
    rows = np.fromiter((counts[d] for d in dst.tolist()), dtype=np.int64, count=len(dst))
    choice, evaluations = kernels.greedy_assign(ptr, dst_sizes - src_sizes, rows, dst)
    assignment: dict[int, int] = {}
    residual: set[int] = set()
    for k, c in zip(non_dense, choice.tolist()):
        if c < 0:
            residual.add(k)
        else:
            assignment[k] = int(dst[c])
    return MergePlan(_groups_from(dense, assignment), frozenset(residual), config, "greedy", evaluations)


def no_merge(css: CSIndex) -> MergePlan:
    """One memberless group per CS (no merging at all)."""
    idx = _as_index(css)
    return MergePlan([AncestralSubgraph(c) for c in sorted(idx)], frozenset(), None, "none")


def plan_merge(
    css: Sequence[CharacteristicSet],
    closure: InferredHierarchy,
    m: float,
    algorithm: str = "greedy",
    budget: int = DEFAULT_ENUM_BUDGET,
) -> MergePlan:
    config = DensityConfig(m)
    if algorithm == "none":
        plan = no_merge(css)
        plan.config = config
        return plan
    dense = classify_dense(css, config)
    if algorithm == "greedy":
        return greedy_merge(closure, css, dense, config)
    if algorithm == "optimal":
        return optimal_merge(closure, css, dense, budget, config)
    raise ValueError(f"unknown merge algorithm {algorithm!r}")


@dataclass
class ResidualSchema:
    cs_ids: tuple[int, ...]
    columns: frozenset[int]
    row_count: int
    null_cells: int


def build_residual(uncovered: Iterable[int], css: CSIndex) -> Optional[ResidualSchema]:
    """Schema of the catch-all table for CSs outside every group."""
    idx = _as_index(css)
    ids = tuple(sorted(uncovered))
    if not ids:
        return None
    columns = frozenset().union(*(idx[c].properties for c in ids))
    rows = sum(idx[c].n for c in ids)
    nulls = sum(len(columns - idx[c].properties) * idx[c].n for c in ids)
    return ResidualSchema(ids, columns, rows, nulls)


def dense_coverage(plan: MergePlan, css: CSIndex) -> float:
    """Fraction of (distinct) triples stored outside the residual table."""
    idx = _as_index(css)
    total = sum(c.triple_count() for c in idx.values())
    if total == 0:
        return 1.0
    resid = sum(idx[c].triple_count() for c in plan.residual)
    return (total - resid) / total
