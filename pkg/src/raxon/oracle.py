"""Reference BGP evaluation straight over the triple list.

Two independent matchers are provided: a full scan per pattern and a lookup
through hash indexes keyed by (p), (p, s) and (p, o).  Both work over the
distinct triples, extend bindings pattern by pattern and return a bag of rows.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Optional, Sequence

import numpy as np

from .engine import ResultSet, resolve
from .ingest import TermDictionary, dedupe_triples
from .sparql import BGP, Constant, TriplePattern, Variable


class TripleIndex:
    def __init__(self, triples: Sequence[tuple[int, int, int]]):
        self.triples = list(triples)
        self.by_p: dict[int, list[tuple[int, int]]] = defaultdict(list)
        self.by_ps: dict[tuple[int, int], list[int]] = defaultdict(list)
        self.by_po: dict[tuple[int, int], list[int]] = defaultdict(list)
        for s, p, o in self.triples:
            self.by_p[p].append((s, o))
            self.by_ps[(p, s)].append(o)
            self.by_po[(p, o)].append(s)

    def match(self, s: Optional[int], p: Optional[int], o: Optional[int]):
        if p is None:
            for ts, tp, to in self.triples:
                if (s is None or ts == s) and (o is None or to == o):
                    yield ts, tp, to
        elif s is not None:
            for to in self.by_ps.get((p, s), ()):
                if o is None or to == o:
                    yield s, p, to
        elif o is not None:
            for ts in self.by_po.get((p, o), ()):
                yield ts, p, o
        else:
            for ts, to in self.by_p.get(p, ()):
                yield ts, p, to


def _value(node, binding: dict[str, int]) -> Optional[int]:
    if isinstance(node, Constant):
        return node.value
    return binding.get(node.name)


def _extend(binding: dict[str, int], t: TriplePattern, triple) -> Optional[dict[str, int]]:
    out = binding
    for node, val in zip((t.s, t.p, t.o), triple):
        if isinstance(node, Variable):
            cur = out.get(node.name)
            if cur is None:
                if out is binding:
                    out = dict(binding)
                out[node.name] = val
            elif cur != val:
                return None
        elif node.value != val:
            return None
    return out


def evaluate_patterns(patterns: Sequence[TriplePattern], triples, header: Sequence[str],
                      indexed: bool = True) -> np.ndarray:
    """Bag of projected bindings for already-resolved ``patterns``."""
    distinct = [tuple(t) for t in dedupe_triples(triples).tolist()]
    index = TripleIndex(distinct) if indexed else None
    if any(isinstance(n, Constant) and n.value is None for t in patterns for n in (t.s, t.p, t.o)):
        return np.empty((0, len(header)), dtype=np.int64)
    bindings: list[dict[str, int]] = [{}]
    for t in patterns:
        nxt: list[dict[str, int]] = []
        for b in bindings:
            if index is not None:
                candidates = index.match(_value(t.s, b), _value(t.p, b), _value(t.o, b))
            else:
                candidates = distinct
            for triple in candidates:
                e = _extend(b, t, triple)
                if e is not None:
                    nxt.append(e)
        bindings = nxt
        if not bindings:
            break
    rows = [[b[v] for v in header] for b in bindings]
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), len(header))


def oracle_execute(bgp: BGP, triples, dictionary: TermDictionary, indexed: bool = True) -> ResultSet:
    header = list(bgp.projection)
    patterns = resolve(bgp, dictionary)
    return ResultSet(header, evaluate_patterns(patterns, triples, header, indexed))
