"""Synthetic RDF corpora with a controllable CS lattice, plus matching queries.

A corpus holds a few entity families.  Each family draws its property sets
from a lattice shape over its optional properties:

* ``chain``     -- nested prefixes ``{} < {o1} < {o1,o2} < ...``
* ``diamond``   -- two incomparable middles under a shared top
* ``bipartite`` -- singleton ancestors under every pair of optionals, so
  most ancestors have several candidate descendants

Families link to the next family in a ring (``link``) and to arbitrary
subjects through a shared ``ref`` property, and a fraction of ring links is
closed into triangles so cyclic queries have answers.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ingest import RDF_TYPE

NS = "http://example.org/"
SHAPES = ("chain", "diamond", "bipartite")
QUERY_KINDS = ("star", "chain", "chain-star", "cyclic")


def _iri(s: str) -> str:
    return f"<{s}>"


def prop_iri(name: str) -> str:
    return f"{NS}p/{name}"


def _lattice(shape: str, optional: list[str]) -> list[frozenset[str]]:
    k = len(optional)
    if shape == "chain":
        sets = [optional[:j] for j in range(k + 1)]
    elif shape == "diamond":
        a, b, *rest = optional
        sets = [[], [a], [b], [a, b]]
        sets += [[a, b] + rest[: j + 1] for j in range(len(rest))]
    elif shape == "bipartite":
        sets = [[o] for o in optional] + [list(c) for c in itertools.combinations(optional, 2)]
    else:
        raise ValueError(f"unknown lattice shape {shape!r} (choose from {', '.join(SHAPES)})")
    return [frozenset(s) for s in sets]


@dataclass
class GenConfig:
    shape: str = "diamond"
    subjects: int = 2000
    families: int = 3
    skew: float = 0.6  # weight ratio between consecutive CS ranks; 1.0 = uniform
    link_density: float = 1.5  # mean number of values on link properties
    multi_valued: float = 0.2  # chance that an attribute cell holds several values
    triangles: float = 0.3  # fraction of ring links closed into a triangle
    vocab: int = 6  # distinct literal values per attribute
    seed: int = 0


@dataclass
class Corpus:
    config: GenConfig
    # subject IRI -> property IRI -> object tokens in N-Triples syntax
    records: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    families: dict[str, list[str]] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = []
        for s, props in self.records.items():
            for p, objs in props.items():
                for o in objs:
                    out.append(f"{_iri(s)} {_iri(p)} {o} .")
        return out

    def ntriples(self) -> bytes:
        return ("\n".join(self.lines()) + "\n").encode("utf-8")

    def write(self, path) -> int:
        lines = self.lines()
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return len(lines)

    def __len__(self) -> int:
        return sum(len(v) for props in self.records.values() for v in props.values())


def generate(config: Optional[GenConfig] = None, **overrides) -> Corpus:
    cfg = config or GenConfig()
    if overrides:
        cfg = GenConfig(**{**cfg.__dict__, **overrides})
    if cfg.shape not in SHAPES:
        raise ValueError(f"unknown lattice shape {cfg.shape!r} (choose from {', '.join(SHAPES)})")
    if cfg.families < 1 or cfg.subjects < cfg.families:
        raise ValueError("need at least one family and one subject per family")
    rng = random.Random(cfg.seed)
    corpus = Corpus(cfg)
    fams = [f"F{i}" for i in range(cfg.families)]
    specs = []
    for i, fam in enumerate(fams):
        optional = ["link", f"{fam.lower()}_a", "shared_b", "ref"]
        if cfg.shape != "chain":
            optional.append(f"{fam.lower()}_c")
        rng.shuffle(optional)
        sets = _lattice(cfg.shape, optional)
        ranks = list(range(len(sets)))
        rng.shuffle(ranks)
        weights = [cfg.skew ** r for r in ranks]
        specs.append((fam, sets, weights))
    total_w = sum(sum(w) for _, _, w in specs)
    for fam, sets, weights in specs:
        subjects = []
        for props, w in zip(sets, weights):
            n = max(1, round(cfg.subjects * w / total_w))
            for _ in range(n):
                subjects.append((f"{NS}{fam.lower()}/{len(subjects)}", props))
        corpus.families[fam] = [s for s, _ in subjects]
        for s, props in subjects:
            corpus.records[s] = {"__props__": sorted(props)}  # filled below
    all_subjects = list(corpus.records)

    def attr_values(name):
        n = rng.choice((2, 3)) if rng.random() < cfg.multi_valued else 1
        picks = rng.sample(range(cfg.vocab), min(n, cfg.vocab))
        return [f'"{name}-{v}"' for v in sorted(picks)]

    def links(pool):
        n = 1
        while n < 4 and rng.random() < (cfg.link_density - 1) / cfg.link_density:
            n += 1
        return [_iri(t) for t in dict.fromkeys(rng.choices(pool, k=n))]

    for i, fam in enumerate(fams):
        nxt = corpus.families[fams[(i + 1) % len(fams)]]
        for idx, s in enumerate(corpus.families[fam]):
            props = corpus.records[s].pop("__props__")
            rec = corpus.records[s]
            rec[RDF_TYPE] = [_iri(f"{NS}class/{fam}")]
            rec[prop_iri("name")] = [f'"{fam} {idx}"']
            for p in props:
                if p == "link":
                    rec[prop_iri("link")] = links(nxt)
                elif p == "ref":
                    # a few refs dangle (no subject owns the target)
                    if rng.random() < 0.1:
                        rec[prop_iri("ref")] = [_iri(f"{NS}external/{rng.randrange(50)}")]
                    else:
                        rec[prop_iri("ref")] = links(all_subjects)
                else:
                    rec[prop_iri(p)] = attr_values(p)
    _close_triangles(corpus, fams, rng)
    return corpus


def _close_triangles(corpus: Corpus, fams: list[str], rng: random.Random) -> None:
    if len(fams) < 3:
        return
    link = prop_iri("link")
    recs = corpus.records
    first = corpus.families[fams[0]]
    for a in first:
        if rng.random() >= corpus.config.triangles or link not in recs[a]:
            continue
        b = recs[a][link][0][1:-1]
        if link not in recs[b]:
            continue
        c = recs[b][link][0][1:-1]
        vals = recs[c].get(link)
        if len(fams) == 3 and vals is not None and _iri(a) not in vals:
            vals.append(_iri(a))


# -- queries -----------------------------------------------------------------

def _var_gen():
    for i in itertools.count():
        yield f"v{i}"


class _QueryBuilder:
    def __init__(self, corpus: Corpus, rng: random.Random):
        self.corpus = corpus
        self.rng = rng
        self.subjects = list(corpus.records)

    def _props(self, s: str) -> list[str]:
        return list(self.corpus.records[s])

    def _subject_links(self, s: str) -> list[tuple[str, str]]:
        out = []
        for p, objs in self.corpus.records[s].items():
            for o in objs:
                if o.startswith("<") and o[1:-1] in self.corpus.records and p != RDF_TYPE:
                    out.append((p, o[1:-1]))
        return out

    def star(self, s: str, var: str, names, k: int, constants: bool) -> list[str]:
        props = self._props(s)
        chosen = self.rng.sample(props, min(k, len(props)))
        pats = []
        for p in chosen:
            vals = self.corpus.records[s][p]
            if constants and (p == RDF_TYPE or self.rng.random() < 0.3):
                pats.append(f"{var} <{p}> {self.rng.choice(vals)}")
            else:
                pats.append(f"{var} <{p}> ?{next(names)}")
        return pats

    def walk(self, length: int) -> Optional[list[tuple[str, str, str]]]:
        for _ in range(50):
            s = self.rng.choice(self.subjects)
            steps = []
            cur = s
            for _ in range(length):
                nxt = self._subject_links(cur)
                if not nxt:
                    break
                p, o = self.rng.choice(nxt)
                steps.append((cur, p, o))
                cur = o
            if len(steps) == length:
                return steps
        return None

    def build(self, kind: str) -> Optional[str]:
        names = _var_gen()
        rng = self.rng
        if kind == "star":
            s = rng.choice(self.subjects)
            subj = f"<{s}>" if rng.random() < 0.15 else "?x"
            pats = self.star(s, subj, names, rng.randint(2, 4), constants=True)
            if all("?" not in p for p in pats):
                pats.append(f"{subj} <{prop_iri('name')}> ?{next(names)}")
        elif kind in ("chain", "chain-star"):
            steps = self.walk(rng.randint(2, 3))
            if steps is None:
                return None
            nodes = [f"?n{i}" for i in range(len(steps) + 1)]
            pats = [f"{nodes[i]} <{p}> {nodes[i + 1]}" for i, (_, p, _) in enumerate(steps)]
            if kind == "chain-star":
                for i, (s, _, _) in enumerate(steps):
                    pats += self.star(s, nodes[i], names, rng.randint(1, 2), constants=i == 0)
                end = steps[-1][2]
                pats += self.star(end, nodes[-1], names, 1, constants=False)
        elif kind == "cyclic":
            return self._cyclic(names)
        else:
            raise ValueError(f"unknown query kind {kind!r}")
        return "SELECT * WHERE {\n  " + " .\n  ".join(dict.fromkeys(pats)) + " .\n}\n"

    def _cyclic(self, names) -> str:
        link, name, ref = prop_iri("link"), prop_iri("name"), prop_iri("ref")
        variant = self.rng.randrange(3)
        if variant == 0:
            pats = [f"?a <{link}> ?b", f"?b <{link}> ?c", f"?c <{link}> ?a"]
            if self.rng.random() < 0.5:
                pats.append(f"?a <{name}> ?{next(names)}")
        elif variant == 1:
            # two subjects meeting on a shared object value
            pats = [f"?a <{name}> ?n", f"?b <{name}> ?n", f"?a <{RDF_TYPE}> ?t"]
        else:
            pats = [f"?a <{link}> ?t", f"?b <{ref}> ?t", f"?b <{link}> ?u", f"?u <{link}> ?w"]
        return "SELECT * WHERE {\n  " + " .\n  ".join(pats) + " .\n}\n"


def generate_queries(corpus: Corpus, per_kind: int = 8, seed: int = 0,
                     kinds=QUERY_KINDS) -> list[tuple[str, str]]:
    """``(kind, query text)`` pairs; walks start from real subjects so most are non-empty."""
    rng = random.Random(seed)
    qb = _QueryBuilder(corpus, rng)
    out = []
    for kind in kinds:
        made = 0
        attempts = 0
        while made < per_kind and attempts < per_kind * 20:
            attempts += 1
            q = qb.build(kind)
            if q is not None:
                out.append((kind, q))
                made += 1
    return out


def write_query_set(queries, path) -> None:
    """Single file, queries separated by ``---`` lines."""
    Path(path).write_text("\n---\n".join(q for _, q in queries), encoding="utf-8")
