"""End-to-end loading: parsed triples to a materialized :class:`Database`."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional

from .cs import build_closure, extract_cs
from .ingest import RDF_TYPE, ParseResult, Term, TermKind, collect_stats
from .merge import DEFAULT_ENUM_BUDGET, dense_coverage, plan_cost, plan_merge
from .storage import Database, materialize


@dataclass
class LoadReport:
    triples: int
    distinct_triples: int
    skipped: int
    cs_count: int
    tables: int
    ecs_links: int
    dense_coverage: float
    plan_cost: float
    null_cells: int
    m: float
    algorithm: str
    seconds: float = 0.0

    def lines(self) -> list[str]:
        """Stable ``key: value`` lines; ``time`` is the only varying one."""
        return [
            f"triples: {self.triples}",
            f"distinct_triples: {self.distinct_triples}",
            f"skipped_lines: {self.skipped}",
            f"m: {self.m:g}",
            f"algorithm: {self.algorithm}",
            f"cs_count: {self.cs_count}",
            f"tables: {self.tables}",
            f"ecs_links: {self.ecs_links}",
            f"dense_coverage: {self.dense_coverage * 100:.2f}%",
            f"plan_cost: {self.plan_cost:.6f}",
            f"null_cells: {self.null_cells}",
            f"time: {self.seconds:.3f}s",
        ]

    def to_json(self) -> dict:
        return asdict(self)


def build_database(
    parsed: ParseResult,
    m: float = 0.25,
    algorithm: str = "greedy",
    budget: int = DEFAULT_ENUM_BUDGET,
    type_iri: Optional[str] = RDF_TYPE,
) -> tuple[Database, LoadReport]:
    t0 = time.perf_counter()
    dictionary = parsed.dictionary
    type_id = dictionary.lookup(Term(TermKind.IRI, type_iri)) if type_iri else None
    stats = collect_stats(parsed.triples, type_id)
    css = extract_cs(parsed.triples)
    closure = build_closure(css)
    plan = plan_merge(css, closure, m, algorithm, budget)
    tables, catalog = materialize(plan, css)
    catalog.type_iri = type_iri
    catalog.stats = stats
    db = Database(dictionary, tables, catalog)
    report = LoadReport(
        triples=len(parsed.triples),
        distinct_triples=stats.total_triples,
        skipped=parsed.skipped,
        cs_count=len(css),
        tables=len(tables),
        ecs_links=len(db.ecs),
        dense_coverage=dense_coverage(plan, css),
        plan_cost=plan_cost(plan, css).total,
        null_cells=sum(t.null_cells() for t in tables),
        m=m,
        algorithm=algorithm,
        seconds=time.perf_counter() - t0,
    )
    return db, report
