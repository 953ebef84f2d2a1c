"""Characteristic-set extraction and the subsumption hierarchy."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .ingest import dedupe_triples


class SubjectRecord(NamedTuple):
    subject: int
    values: dict[int, list[int]]  # property id -> distinct objects, first-seen order


@dataclass
class CharacteristicSet:
    cs_id: int
    properties: frozenset[int]
    records: list[SubjectRecord]

    @property
    def n(self) -> int:
        return len(self.records)

    @cached_property
    def sorted_properties(self) -> tuple[int, ...]:
        return tuple(sorted(self.properties))

    def triple_count(self) -> int:
        return sum(len(v) for rec in self.records for v in rec.values.values())


def extract_cs(triples) -> list[CharacteristicSet]:
    """Group subjects by the exact set of properties they emit.

    Ids are assigned by descending record count, ties broken by the sorted
    property tuple.
    """
    arr = dedupe_triples(triples)
    by_subject: dict[int, dict[int, list[int]]] = {}
    for s, p, o in arr.tolist():
        vals = by_subject.get(s)
        if vals is None:
            vals = by_subject[s] = {}
        objs = vals.get(p)
        if objs is None:
            vals[p] = [o]
        else:
            objs.append(o)  # dedupe_triples already removed repeats
    groups: dict[frozenset[int], list[SubjectRecord]] = {}
    for s, vals in by_subject.items():
        groups.setdefault(frozenset(vals), []).append(SubjectRecord(s, vals))
    keyed = sorted(groups.items(), key=lambda kv: (-len(kv[1]), tuple(sorted(kv[0]))))
    return [CharacteristicSet(i, props, recs) for i, (props, recs) in enumerate(keyed)]


def index_css(css: Iterable[CharacteristicSet]) -> dict[int, CharacteristicSet]:
    return {c.cs_id: c for c in css}


def property_bitsets(sets: Sequence[Iterable[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Pack property sets into an ``(n, words)`` uint64 matrix plus popcounts."""
    universe = sorted({p for s in sets for p in s})
    pos = {p: i for i, p in enumerate(universe)}
    words = max(1, (len(universe) + 63) // 64)
    bits = np.zeros((len(sets), words), dtype=np.uint64)
    sizes = np.zeros(len(sets), dtype=np.int64)
    for row, s in enumerate(sets):
        s = set(s)
        sizes[row] = len(s)
        for p in s:
            b = pos[p]
            bits[row, b >> 6] |= np.uint64(1) << np.uint64(b & 63)
    return bits, sizes


@dataclass
class _EdgeGraph:
    nodes: list[int]
    src: np.ndarray
    dst: np.ndarray

    @classmethod
    def from_edges(cls, nodes: Iterable[int], edges: Iterable[tuple[int, int]]):
        edges = sorted(set(edges))
        src = np.asarray([a for a, _ in edges], dtype=np.int64)
        dst = np.asarray([b for _, b in edges], dtype=np.int64)
        return cls(sorted(nodes), src, dst)

    @cached_property
    def edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(zip(self.src.tolist(), self.dst.tolist()))

    @cached_property
    def children(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n: [] for n in self.nodes}
        for a, b in zip(self.src.tolist(), self.dst.tolist()):
            out[a].append(b)
        return out

    @cached_property
    def parents(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n: [] for n in self.nodes}
        for a, b in zip(self.src.tolist(), self.dst.tolist()):
            out[b].append(a)
        return out

    def __len__(self) -> int:
        return len(self.src)


class InferredHierarchy(_EdgeGraph):
    """Transitive closure of strict property-set inclusion.

    ``(a, b)`` is an edge iff ``P_a`` is a proper subset of ``P_b``; ``children``
    therefore lists all descendants and ``parents`` all ancestors.
    """


class HierarchyLattice(_EdgeGraph):
    """Direct (covering) edges only."""


def build_closure(css: Sequence[CharacteristicSet]) -> InferredHierarchy:
    ids = [c.cs_id for c in css]
    if not css:
        return InferredHierarchy([], np.empty(0, np.int64), np.empty(0, np.int64))
    bits, sizes = property_bitsets([c.properties for c in css])
    i, j = kernels.subset_closure(bits, sizes)
    id_arr = np.asarray(ids, dtype=np.int64)
    src, dst = id_arr[i], id_arr[j]
    order = np.lexsort((dst, src))
    return InferredHierarchy(sorted(ids), src[order], dst[order])


def build_direct_lattice(closure: InferredHierarchy) -> HierarchyLattice:
    """Remove every closure edge implied by a two-step path."""
    nodes = closure.nodes
    if len(closure) == 0:
        return HierarchyLattice(list(nodes), np.empty(0, np.int64), np.empty(0, np.int64))
    pos = {n: i for i, n in enumerate(nodes)}
    lookup = np.asarray(nodes, dtype=np.int64)
    src = np.fromiter((pos[a] for a in closure.src.tolist()), dtype=np.int64, count=len(closure))
    dst = np.fromiter((pos[b] for b in closure.dst.tolist()), dtype=np.int64, count=len(closure))
    i, j = kernels.transitive_reduction(len(nodes), src, dst)
    src_id, dst_id = lookup[i], lookup[j]
    order = np.lexsort((dst_id, src_id))
    return HierarchyLattice(list(nodes), src_id[order], dst_id[order])
