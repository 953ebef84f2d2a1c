"""Command-line interface: ``raxon load|stats|merge-plan|query|verify|gen``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from pathlib import Path
from typing import Optional, Sequence

from . import kernels
from .cs import build_closure, build_direct_lattice, extract_cs, index_css
from .engine import run_query
from .errors import RaxonError
from .ingest import RDF_TYPE, TermDictionary, parse_ntriples
from .merge import ALGORITHMS, DEFAULT_ENUM_BUDGET, dense_coverage, plan_cost, plan_merge
from .pipeline import build_database
from .sparql import parse_query

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _density(text: str) -> float:
    try:
        m = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= m <= 1.0:
        raise argparse.ArgumentTypeError(f"density factor must lie in [0, 1], got {m:g}")
    return m


def _grid(text: str) -> list[float]:
    return [_density(x) for x in text.split(",") if x.strip()]


def _db_dir(args) -> Path:
    path = args.db or os.environ.get("RAXON_DB")
    if not path:
        raise UsageError("no database directory (use --db or set RAXON_DB)")
    return Path(path)


def _parse_input(args):
    return parse_ntriples(Path(args.input), strict=args.strict)


def _write_json(path: Optional[str], obj) -> None:
    if path:
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out(line: str = "") -> None:
    sys.stdout.write(line + "\n")


# -- subcommands ----------------------------------------------------------------

def cmd_load(args) -> int:
    from .storage import persist

    db_dir = _db_dir(args)
    if db_dir.exists() and (not db_dir.is_dir() or any(db_dir.iterdir())):
        raise UsageError(f"{db_dir} exists and is not an empty directory")
    parsed = _parse_input(args)
    db, report = build_database(parsed, m=args.m, algorithm=args.algo, budget=args.enum_budget,
                                type_iri=args.type_iri)
    persist(db, db_dir)
    for line in report.lines():
        _out(line)
    _write_json(args.json, report.to_json())
    return EXIT_OK


def _histogram(counts: Sequence[int]) -> list[tuple[str, int]]:
    buckets: Counter = Counter()
    for n in counts:
        lo = 10 ** (len(str(n)) - 1)
        buckets[lo] += 1
    return [(f"{lo}-{lo * 10 - 1}" if lo > 1 else "1-9", buckets[lo]) for lo in sorted(buckets)]


def cmd_stats(args) -> int:
    parsed = _parse_input(args)
    css = extract_cs(parsed.triples)
    closure = build_closure(css)
    lattice = build_direct_lattice(closure)
    hist = _histogram([c.n for c in css])
    _out(f"triples: {len(parsed.triples)}")
    _out(f"skipped_lines: {parsed.skipped}")
    _out(f"subjects: {sum(c.n for c in css)}")
    _out(f"cs_count: {len(css)}")
    _out(f"direct_edges: {len(lattice.edges)}")
    _out(f"closure_edges: {len(closure.edges)}")
    for label, n in hist:
        _out(f"records {label}: {n}")
    _write_json(args.json, {
        "triples": len(parsed.triples),
        "cs_count": len(css),
        "direct_edges": len(lattice.edges),
        "closure_edges": len(closure.edges),
        "histogram": dict(hist),
        "records": [c.n for c in css],
    })
    return EXIT_OK


def cmd_merge_plan(args) -> int:
    parsed = _parse_input(args)
    css = extract_cs(parsed.triples)
    idx = index_css(css)
    closure = build_closure(css)
    plan = plan_merge(css, closure, args.m, args.algo, args.enum_budget)
    cost = plan_cost(plan, idx)
    coverage = dense_coverage(plan, idx)
    _out(f"algorithm: {plan.algorithm}")
    _out(f"m: {args.m:g}")
    _out(f"cs_count: {len(css)}")
    _out(f"tables: {plan.table_count}")
    for g in plan.groups:
        members = ",".join(str(x) for x in sorted(g.members)) or "-"
        _out(f"group base={g.base} rows={idx[g.base].n} members={members} r_null={cost.per_group[g.base]:.6f}")
    _out(f"residual: {','.join(str(x) for x in sorted(plan.residual)) or '-'}")
    _out(f"total_cost: {cost.total:.6f}")
    _out(f"dense_coverage: {coverage * 100:.2f}%")
    _out(f"evaluations: {plan.evaluations}")
    _write_json(args.json, {
        "algorithm": plan.algorithm,
        "m": args.m,
        "groups": [
            {"base": g.base, "members": sorted(g.members), "r_null": cost.per_group[g.base]}
            for g in plan.groups
        ],
        "residual": sorted(plan.residual),
        "total_cost": cost.total,
        "dense_coverage": coverage,
        "evaluations": plan.evaluations,
    })
    return EXIT_OK


def _explain(trace, db) -> None:
    def term(node):
        from .sparql import Constant
        if isinstance(node, Constant):
            return "?unknown" if node.value is None else db.dictionary.decode(node.value).to_ntriples()
        return str(node)

    def pat(t):
        return f"{term(t.s)} {term(t.p)} {term(t.o)}"

    if trace.plan is not None:
        qm = trace.plan.qmatrix
        _out("# Q_m columns: " + " | ".join(term(n) for n in qm.nodes))
        for i, row in enumerate(qm.values.tolist()):
            _out(f"#   t{i}: " + " ".join(f"{v:g}" for v in row))
        for a, b, d in trace.plan.pairs:
            _out(f"# pair t{a} t{b} distance={d:.6g}")
        for i, sp in enumerate(trace.plan.subplans):
            _out(f"# subplan {i}: " + " ".join(f"t{x}" for x in sp))
        _out("# order: " + " ".join(f"t{x}" for x in trace.plan.order))
    for i, t in enumerate(trace.patterns):
        _out(f"# pattern {i}: {pat(t)}")
    graph = trace.graph
    for q in graph.nodes:
        preds = ", ".join(sorted({term(t.p) for t in q.patterns}))
        _out(f"# query CS q{q.index} subject={term(q.subject)} predicates={{{preds}}} "
             f"matches={trace.matches[q.index]}")
    for e in graph.join_edges:
        _out(f"# join q{e.source} -[{db.dictionary.decode(e.prop).to_ntriples()}]-> q{e.target}")
    for a in graph.aux_equalities:
        _out(f"# equality ?{a.var} across " + ", ".join(f"q{i}" for i in a.members))
    _out(f"# permutations: {len(trace.permutations)}")
    for perm, n in zip(trace.permutations, trace.row_counts):
        _out(f"#   {list(perm.assignment)} rows={n}")


def cmd_query(args) -> int:
    from .storage import load

    db = load(_db_dir(args))
    text = Path(args.file).read_text(encoding="utf-8") if args.file else sys.stdin.read()
    bgp = parse_query(text)
    result, trace = run_query(bgp, db, planner=args.planner, ecs_pruning=not args.no_ecs,
                              parallel=args.parallel)
    if args.explain:
        _explain(trace, db)
    sys.stdout.write(result.to_tsv(db.dictionary))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .storage import load
    from .verify import load_query_set, verify_corpus, verify_database

    queries = load_query_set(args.queries)
    if args.db:
        db = load(Path(args.db))
        # share term ids with the stored database so bindings compare directly
        parsed = parse_ntriples(Path(args.input), strict=args.strict,
                                dictionary=TermDictionary(list(db.dictionary)))
        bgps = [(name, parse_query(text)) for name, text in queries]
        report = verify_database(db, parsed.triples, parsed.dictionary, bgps, db.catalog.m)
    else:
        parsed = _parse_input(args)
        report = verify_corpus(parsed, queries, args.m_grid, args.algo, args.enum_budget,
                               round_trip=not args.no_round_trip)
    for mm in report.mismatches:
        _out(f"MISMATCH {mm}")
    _out(f"queries: {len(queries)}")
    _out(f"checks: {report.checks}")
    _out(f"mismatches: {len(report.mismatches)}")
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_gen(args) -> int:
    from .gen import GenConfig, generate, generate_queries, write_query_set

    cfg = GenConfig(shape=args.shape, subjects=args.subjects, families=args.families, skew=args.skew,
                    link_density=args.link_density, multi_valued=args.multi_valued, seed=args.seed)
    corpus = generate(cfg)
    n = corpus.write(args.output)
    _out(f"triples: {n}")
    _out(f"subjects: {len(corpus.records)}")
    if args.queries:
        qs = generate_queries(corpus, per_kind=args.per_kind, seed=args.seed)
        write_query_set(qs, args.queries)
        _out(f"queries: {len(qs)}")
    return EXIT_OK


# -- wiring -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="raxon", description="Characteristic-set RDF store.")
    p.add_argument("--kernels", choices=("python", "cython"), help="force a kernel backend")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def ingest_opts(sp, required=True):
        sp.add_argument("--input", required=required, help="N-Triples file")
        sp.add_argument("--strict", action="store_true", help="abort on the first malformed line")

    def merge_opts(sp):
        sp.add_argument("--m", type=_density, default=0.25, help="density factor in [0, 1]")
        sp.add_argument("--algo", choices=ALGORITHMS, default="greedy")
        sp.add_argument("--enum-budget", type=int, default=DEFAULT_ENUM_BUDGET)

    sp = sub.add_parser("load", help="build a database directory")
    ingest_opts(sp)
    merge_opts(sp)
    sp.add_argument("--db", help="database directory (default: $RAXON_DB)")
    sp.add_argument("--type-iri", default=RDF_TYPE)
    sp.add_argument("--json", help="write the report as JSON here too")
    sp.set_defaults(func=cmd_load)

    sp = sub.add_parser("stats", help="CS and lattice statistics")
    ingest_opts(sp)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("merge-plan", help="plan and cost a merge without materializing")
    ingest_opts(sp)
    merge_opts(sp)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_merge_plan)

    sp = sub.add_parser("query", help="run a SELECT query")
    sp.add_argument("--db")
    sp.add_argument("--file", help="query file (default: stdin)")
    sp.add_argument("--planner", choices=("none", "distance"), default="none")
    sp.add_argument("--explain", action="store_true")
    sp.add_argument("--parallel", action="store_true", help="run permutations on a thread pool")
    sp.add_argument("--no-ecs", action="store_true", help="disable ECS permutation pruning")
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("verify", help="compare the engine with the oracle")
    ingest_opts(sp)
    merge_opts(sp)
    sp.add_argument("--queries", required=True, help="directory of .rq files or a '---'-separated file")
    sp.add_argument("--m-grid", type=_grid, default=[0.0, 0.1, 0.3, 0.5, 1.0])
    sp.add_argument("--db", help="check this existing database instead of loading a grid")
    sp.add_argument("--no-round-trip", action="store_true")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("gen", help="write a synthetic corpus")
    sp.add_argument("--output", required=True)
    sp.add_argument("--shape", choices=("chain", "diamond", "bipartite"), default="diamond")
    sp.add_argument("--subjects", type=int, default=2000)
    sp.add_argument("--families", type=int, default=3)
    sp.add_argument("--skew", type=float, default=0.6)
    sp.add_argument("--link-density", type=float, default=1.5)
    sp.add_argument("--multi-valued", type=float, default=0.2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--queries", help="also write a query set here")
    sp.add_argument("--per-kind", type=int, default=8)
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.kernels:
        kernels.use(args.kernels)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"raxon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RaxonError, OSError, ValueError) as exc:
        print(f"raxon: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
