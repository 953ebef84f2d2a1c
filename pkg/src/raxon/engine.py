"""BGP evaluation over merged CS tables.

A query is split into query CSs (patterns sharing a subject), each query CS
is matched against every table whose columns cover its predicates, and every
ECS-consistent assignment of tables to query CSs (a permutation) is evaluated
separately; the per-permutation results are appended.
"""
from __future__ import annotations

import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .ingest import TermDictionary
from .planner import PlanTrace, plan_patterns
from .sparql import BGP, Constant, Node, TriplePattern, Variable
from .storage import Catalog, Database, EcsIndex, MergedTable, scan


@dataclass
class QueryCS:
    index: int
    subject: Node
    predicates: frozenset
    patterns: list[TriplePattern]


@dataclass(frozen=True)
class JoinEdge:
    source: int  # query CS index holding the object variable
    prop: object
    target: int  # query CS whose subject key is that variable


@dataclass(frozen=True)
class AuxEquality:
    var: str
    members: tuple[int, ...]


@dataclass
class QueryGraph:
    nodes: list[QueryCS]
    join_edges: list[JoinEdge]
    aux_equalities: list[AuxEquality]


@dataclass(frozen=True)
class TablePermutation:
    assignment: tuple[int, ...]  # table id per query CS index

    def __getitem__(self, qcs: int) -> int:
        return self.assignment[qcs]


@dataclass
class ResultSet:
    header: list[str]
    rows: np.ndarray  # (n, len(header)) term ids

    def __len__(self) -> int:
        return len(self.rows)

    def multiset(self) -> Counter:
        return Counter(map(tuple, self.rows.tolist()))

    def decoded(self, dictionary: TermDictionary) -> list[list[str]]:
        return [[dictionary.decode(v).to_ntriples() for v in row] for row in self.rows.tolist()]

    def to_tsv(self, dictionary: TermDictionary) -> str:
        lines = ["\t".join(f"?{v}" for v in self.header)]
        lines.extend("\t".join(r) for r in self.decoded(dictionary))
        return "\n".join(lines) + "\n"

    @classmethod
    def empty(cls, header: Sequence[str]) -> "ResultSet":
        return cls(list(header), np.empty((0, len(header)), dtype=np.int64))


def decompose(patterns: Union[BGP, Sequence[TriplePattern]]) -> QueryGraph:
    """Group patterns by subject key and derive joins between the groups."""
    if isinstance(patterns, BGP):
        patterns = patterns.patterns
    nodes: list[QueryCS] = []
    by_key: dict[Node, QueryCS] = {}
    for t in patterns:
        q = by_key.get(t.s)
        if q is None:
            q = by_key[t.s] = QueryCS(len(nodes), t.s, frozenset(), [])
            nodes.append(q)
        q.patterns.append(t)
        q.predicates = q.predicates | {t.p.value}
    edges: list[JoinEdge] = []
    object_users: dict[str, list[int]] = {}
    for q in nodes:
        for t in q.patterns:
            if isinstance(t.o, Variable):
                users = object_users.setdefault(t.o.name, [])
                if q.index not in users:
                    users.append(q.index)
                target = by_key.get(t.o)
                if target is not None:
                    e = JoinEdge(q.index, t.p.value, target.index)
                    if e not in edges:
                        edges.append(e)
    aux = [
        AuxEquality(v, tuple(users))
        for v, users in object_users.items()
        if Variable(v) not in by_key and len(users) > 1
    ]
    return QueryGraph(nodes, edges, aux)


def match_tables(qcs: QueryCS, catalog: Union[Catalog, Database]) -> list[int]:
    """Tables whose column set is a superset of the query CS predicates."""
    if isinstance(catalog, Database):
        catalog = catalog.catalog
    if None in qcs.predicates:
        return []
    return [t.table_id for t in catalog.tables if qcs.predicates <= t.property_set]


def enumerate_permutations(graph: QueryGraph, matches: Sequence[Sequence[int]],
                           ecs: Optional[EcsIndex]) -> list[TablePermutation]:
    """Cartesian product of matches, keeping only ECS-backed join edges.

    Output is in lexicographic order of table ids.  ``ecs=None`` disables
    pruning.
    """
    n = len(graph.nodes)
    lists = [sorted(m) for m in matches]
    # edges become checkable once both endpoints are assigned
    check_at: list[list[JoinEdge]] = [[] for _ in range(n)]
    for e in graph.join_edges:
        check_at[max(e.source, e.target)].append(e)
    out: list[TablePermutation] = []
    cur = [0] * n

    def dfs(level):
        if level == n:
            out.append(TablePermutation(tuple(cur)))
            return
        for tid in lists[level]:
            cur[level] = tid
            if ecs is not None and any(not ecs.linked(cur[e.source], cur[e.target]) for e in check_at[level]):
                continue
            dfs(level + 1)

    if n:
        dfs(0)
    return out


# -- execution ---------------------------------------------------------------

@dataclass
class _Relation:
    n: int
    cols: dict[str, np.ndarray] = field(default_factory=dict)

    def take(self, idx: np.ndarray) -> "_Relation":
        return _Relation(len(idx), {k: v[idx] for k, v in self.cols.items()})


def hash_join(left: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Equi-join on int64 keys; build side is the smaller input.

    Returns matching ``(left_idx, right_idx)`` ordered by left then right index.
    """
    if len(left) <= len(right):
        ri, li = kernels.hash_join_probe(left, right)
        order = np.lexsort((ri, li))
        return li[order], ri[order]
    li, ri = kernels.hash_join_probe(right, left)
    return li, ri


def _join_keys(a: _Relation, b: _Relation, shared: list[str]) -> tuple[np.ndarray, np.ndarray]:
    if len(shared) == 1:
        return a.cols[shared[0]], b.cols[shared[0]]
    stacked = np.concatenate(
        (np.column_stack([a.cols[v] for v in shared]), np.column_stack([b.cols[v] for v in shared]))
    )
    _, codes = np.unique(stacked, axis=0, return_inverse=True)
    codes = codes.reshape(-1).astype(np.int64)
    return codes[: a.n], codes[a.n:]


def _join(a: _Relation, b: _Relation) -> _Relation:
    shared = [v for v in a.cols if v in b.cols]
    if shared:
        lk, rk = _join_keys(a, b, shared)
        li, ri = hash_join(lk, rk)
    else:
        li = np.repeat(np.arange(a.n, dtype=np.int64), b.n)
        ri = np.tile(np.arange(b.n, dtype=np.int64), a.n)
    out = a.take(li)
    for k, v in b.cols.items():
        if k not in out.cols:
            out.cols[k] = v[ri]
    return out


def _local_relation(q: QueryCS, table: MergedTable, db: Database) -> _Relation:
    filters = [(t.p.value, t.o.value) for t in q.patterns if isinstance(t.o, Constant)]
    candidates = None
    if isinstance(q.subject, Constant):
        loc = db.locate(q.subject.value) if q.subject.value is not None else None
        if loc is None or loc[0] != table.table_id:
            return _Relation(0)
        candidates = np.asarray([loc[1]], dtype=np.int64)
    rows = scan(table, q.predicates, filters, rows=candidates)
    rel = _Relation(len(rows))
    if isinstance(q.subject, Variable):
        rel.cols[q.subject.name] = table.subjects[rows]
    for t in q.patterns:
        if not isinstance(t.o, Variable):
            continue
        col = table.column(t.p.value)
        lengths = col.lengths[rows]
        rep = np.repeat(np.arange(len(rows), dtype=np.int64), lengths)
        within = np.arange(len(rep), dtype=np.int64) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        vals = col.values[col.offsets[rows][rep] + within]
        rel = rel.take(rep)
        rows = rows[rep]
        name = t.o.name
        if name in rel.cols:
            keep = np.flatnonzero(rel.cols[name] == vals)
            rel = rel.take(keep)
            rows = rows[keep]
        else:
            rel.cols[name] = vals
    return rel


def evaluate_permutation(graph: QueryGraph, perm: TablePermutation, db: Database,
                         header: Sequence[str]) -> np.ndarray:
    acc: Optional[_Relation] = None
    for q in graph.nodes:
        rel = _local_relation(q, db.tables[perm[q.index]], db)
        acc = rel if acc is None else _join(acc, rel)
        if acc.n == 0:
            break
    if acc is None or acc.n == 0:
        return np.empty((0, len(header)), dtype=np.int64)
    if not header:
        return np.empty((acc.n, 0), dtype=np.int64)
    return np.column_stack([acc.cols[v] for v in header]).astype(np.int64)


def resolve(bgp: BGP, dictionary: TermDictionary) -> list[TriplePattern]:
    """Replace constant terms by term ids (``None`` when absent from the data)."""
    def r(n: Node) -> Node:
        return Constant(dictionary.lookup(n.value)) if isinstance(n, Constant) else n

    return [TriplePattern(r(t.s), r(t.p), r(t.o)) for t in bgp.patterns]


@dataclass
class ExecutionTrace:
    plan: Optional[PlanTrace] = None
    patterns: list[TriplePattern] = field(default_factory=list)
    graph: Optional[QueryGraph] = None
    matches: list[list[int]] = field(default_factory=list)
    permutations: list[TablePermutation] = field(default_factory=list)
    row_counts: list[int] = field(default_factory=list)


def run_query(bgp: BGP, db: Database, planner: str = "none", ecs_pruning: bool = True,
              parallel: bool = False) -> tuple[ResultSet, ExecutionTrace]:
    trace = ExecutionTrace()
    header = list(bgp.projection)
    patterns = resolve(bgp, db.dictionary)
    if planner == "distance":
        trace.plan = plan_patterns(patterns, db.stats, db.type_id)
        patterns = [patterns[i] for i in trace.plan.order]
    elif planner != "none":
        raise ValueError(f"unknown planner {planner!r}")
    trace.patterns = patterns
    graph = decompose(patterns)
    trace.graph = graph
    if any(isinstance(n, Constant) and n.value is None for t in patterns for n in (t.s, t.p, t.o)):
        trace.matches = [[] for _ in graph.nodes]
        return ResultSet.empty(header), trace
    matches = []
    for q in graph.nodes:
        m = match_tables(q, db.catalog)
        if isinstance(q.subject, Constant):
            loc = db.locate(q.subject.value)
            m = [tid for tid in m if loc is not None and tid == loc[0]]
        matches.append(m)
    trace.matches = matches
    perms = enumerate_permutations(graph, matches, db.ecs if ecs_pruning else None)
    trace.permutations = perms

    def one(perm):
        return evaluate_permutation(graph, perm, db, header)

    if parallel and len(perms) > 1:
        with ThreadPoolExecutor() as pool:
            parts = list(pool.map(one, perms))
    else:
        parts = [one(p) for p in perms]
    trace.row_counts = [len(p) for p in parts]
    if not parts:
        return ResultSet.empty(header), trace
    return ResultSet(header, np.concatenate(parts)), trace


def execute(bgp: BGP, db: Database, planner: str = "none", ecs_pruning: bool = True,
            parallel: bool = False) -> ResultSet:
    return run_query(bgp, db, planner, ecs_pruning, parallel)[0]
