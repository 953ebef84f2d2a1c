"""Cross-check the table engine against the triple-scan oracle."""
from __future__ import annotations

import re
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .engine import execute
from .ingest import ParseResult
from .merge import DEFAULT_ENUM_BUDGET
from .oracle import oracle_execute
from .pipeline import build_database
from .sparql import BGP, parse_query
from .storage import Database, load, persist

DEFAULT_M_GRID = (0.0, 0.1, 0.3, 0.5, 1.0)
_SEPARATOR = re.compile(r"^---\s*$", re.MULTILINE)


def load_query_set(path) -> list[tuple[str, str]]:
    """``(name, text)`` pairs from a directory of ``*.rq`` files or one ``---``-separated file."""
    p = Path(path)
    if p.is_dir():
        return [(f.name, f.read_text(encoding="utf-8")) for f in sorted(p.glob("*.rq"))]
    text = p.read_text(encoding="utf-8")
    parts = [q.strip() for q in _SEPARATOR.split(text)]
    return [(f"{p.name}#{i}", q) for i, q in enumerate(parts) if q]


@dataclass
class Mismatch:
    query: str
    variant: str
    m: Optional[float]
    expected: int
    got: int
    detail: str = ""

    def __str__(self) -> str:
        where = f"m={self.m:g} " if self.m is not None else ""
        return f"{where}{self.query} [{self.variant}]: expected {self.expected} rows, got {self.got}{self.detail}"


@dataclass
class VerifyReport:
    checks: int = 0
    mismatches: list[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def merge(self, other: "VerifyReport") -> None:
        self.checks += other.checks
        self.mismatches.extend(other.mismatches)


def _diff(expected: Counter, got: Counter) -> str:
    missing = sum((expected - got).values())
    extra = sum((got - expected).values())
    return f" ({missing} missing, {extra} unexpected)"


VARIANTS = (
    ("ecs", dict(planner="none", ecs_pruning=True)),
    ("no-ecs", dict(planner="none", ecs_pruning=False)),
    ("distance", dict(planner="distance", ecs_pruning=True)),
)


def verify_database(db: Database, triples, dictionary, queries: Sequence[tuple[str, BGP]],
                    m: Optional[float] = None, expected: Optional[dict[str, Counter]] = None,
                    variants=VARIANTS) -> VerifyReport:
    """Compare every engine variant with the oracle for each query.

    ``expected`` caches oracle results across calls (the oracle does not
    depend on the storage layout).
    """
    report = VerifyReport()
    cache = expected if expected is not None else {}
    for name, bgp in queries:
        if name not in cache:
            cache[name] = oracle_execute(bgp, triples, dictionary).multiset()
        want = cache[name]
        for label, kwargs in variants:
            got = execute(bgp, db, **kwargs).multiset()
            report.checks += 1
            if got != want:
                report.mismatches.append(Mismatch(name, label, m, sum(want.values()), sum(got.values()),
                                                  _diff(want, got)))
    return report


def verify_corpus(parsed: ParseResult, queries: Sequence[tuple[str, str]],
                  m_grid=DEFAULT_M_GRID, algorithm: str = "greedy",
                  budget: int = DEFAULT_ENUM_BUDGET, round_trip: bool = True) -> VerifyReport:
    """Load at each ``m``, optionally through persist/load, and check all queries."""
    bgps = [(name, parse_query(text)) for name, text in queries]
    report = VerifyReport()
    cache: dict[str, Counter] = {}
    for m in m_grid:
        db, _ = build_database(parsed, m=m, algorithm=algorithm, budget=budget)
        if round_trip:
            with tempfile.TemporaryDirectory() as tmp:
                persist(db, Path(tmp) / "db")
                db = load(Path(tmp) / "db")
        report.merge(verify_database(db, parsed.triples, parsed.dictionary, bgps, m, cache))
    return report
