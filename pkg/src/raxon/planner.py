"""Distance-based triple pattern ordering.

Patterns are embedded as rows of a |T| x |M| matrix over the query's subject
and object nodes, paired by ascending Euclidean distance, grouped into
sub-plans and finally stitched so adjacent sub-plans join where possible.
Constants in patterns are expected to carry resolved term ids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ingest import DatasetStats
from .sparql import Constant, Node, TriplePattern, Variable


def _bound(n: Node) -> bool:
    return isinstance(n, Constant)


def estimate_card(t: TriplePattern, stats: DatasetStats, type_id: Optional[int] = None) -> float:
    s, p, o = _bound(t.s), _bound(t.p), _bound(t.o)
    if p and not s and not o:
        return float(stats.property_card.get(t.p.value, 0))
    if p and s:
        return 1.0
    if p and o:
        if type_id is not None and t.p.value == type_id:
            return float(stats.class_card.get(t.o.value, 0))
        if stats.distinct_subjects == 0:
            return 1.0
        return max(1.0, stats.property_card.get(t.p.value, 0) / stats.distinct_subjects)
    return float(stats.total_triples)


@dataclass
class QMatrix:
    patterns: list[TriplePattern]
    nodes: list[Node]
    values: np.ndarray  # (len(patterns), len(nodes))

    def column(self, node: Node) -> np.ndarray:
        return self.values[:, self.nodes.index(node)]


def build_qmatrix(patterns: Sequence[TriplePattern], stats: DatasetStats,
                  type_id: Optional[int] = None) -> QMatrix:
    nodes: list[Node] = []
    for t in patterns:
        for n in (t.s, t.o):
            if n not in nodes:
                nodes.append(n)
    values = np.zeros((len(patterns), len(nodes)), dtype=np.float64)
    for i, t in enumerate(patterns):
        card = estimate_card(t, stats, type_id)
        values[i, nodes.index(t.s)] = card
        values[i, nodes.index(t.o)] = card
    return QMatrix(list(patterns), nodes, values)


def pairwise_distances(qm: QMatrix) -> list[tuple[int, int, float]]:
    """Every unordered pair ``(a, b)`` with ``a < b``, sorted by distance then indices."""
    rows = qm.values
    out = []
    for a in range(len(rows)):
        for b in range(a + 1, len(rows)):
            out.append((a, b, math.dist(rows[a], rows[b])))
    out.sort(key=lambda x: (x[2], x[0], x[1]))
    return out


def generate_subplans(sorted_pairs: Sequence[tuple[int, int, float]],
                      costs: Sequence[float]) -> list[list[int]]:
    """Grow sub-plans pair by pair; each pattern joins the first sub-plan that claims it."""
    owner: dict[int, list[int]] = {}
    plans: list[list[int]] = []
    for a, b, _ in sorted_pairs:
        pa, pb = owner.get(a), owner.get(b)
        if pa is not None and pb is None:
            pa.append(b)
            owner[b] = pa
        elif pb is not None and pa is None:
            pb.append(a)
            owner[a] = pb
        elif pa is None and pb is None:
            first, second = (a, b) if (costs[a], a) <= (costs[b], b) else (b, a)
            p = [first, second]
            plans.append(p)
            owner[a] = owner[b] = p
    return plans


def _joined(x: TriplePattern, y: TriplePattern) -> bool:
    return bool(set(x.variables()) & set(y.variables()))


def _prioritize_pair(p: list[int], q: list[int], patterns: Sequence[TriplePattern]):
    if not q or _joined(patterns[p[-1]], patterns[q[0]]):
        return p, q
    for t in q:
        if _joined(patterns[p[-1]], patterns[t]):
            q.remove(t)
            p.append(t)
            return _prioritize_pair(p, q, patterns)
    return p, q


def reorder_subplans(queue: Sequence[Sequence[int]], patterns: Sequence[TriplePattern]) -> list[int]:
    """Concatenate sub-plans, pulling joinable patterns forward across each boundary."""
    plans = [list(p) for p in queue]
    if len(plans) == 1:
        return plans[0]
    final: list[int] = []
    cur = plans[0]
    for nxt in plans[1:]:
        if not cur:
            cur = nxt
            continue
        first, second = _prioritize_pair(cur, nxt, patterns)
        final.extend(first)
        cur = second
    final.extend(cur)
    return final


@dataclass
class PlanTrace:
    qmatrix: QMatrix
    pairs: list[tuple[int, int, float]]
    costs: list[float]
    subplans: list[list[int]]
    order: list[int]


def plan_patterns(patterns: Sequence[TriplePattern], stats: DatasetStats,
                  type_id: Optional[int] = None) -> PlanTrace:
    """Full planner run; ``order`` holds indices into ``patterns``."""
    patterns = list(patterns)
    qm = build_qmatrix(patterns, stats, type_id) if patterns else QMatrix([], [], np.zeros((0, 0)))
    costs = [estimate_card(t, stats, type_id) for t in patterns]
    if len(patterns) <= 1:
        return PlanTrace(qm, [], costs, [list(range(len(patterns)))], list(range(len(patterns))))
    pairs = pairwise_distances(qm)
    subplans = generate_subplans(pairs, costs)
    order = reorder_subplans([list(p) for p in subplans], patterns)
    return PlanTrace(qm, pairs, costs, subplans, order)
