"""Time each kernel under the pure-Python and compiled backends.

    python3 benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import random
import time

import numpy as np

from raxon import kernels
from raxon.cs import property_bitsets


def _closure_inputs(rng, n, universe=96):
    sets = {frozenset(rng.sample(range(universe), rng.randint(2, 24))) for _ in range(n)}
    bits, sizes = property_bitsets(sorted(sets, key=sorted))
    return bits, sizes


def make_cases(scale: float, seed: int = 0):
    rng = random.Random(seed)
    nprng = np.random.default_rng(seed)
    n_cs = max(50, int(2000 * scale))
    bits, sizes = _closure_inputs(rng, n_cs)
    src, dst = kernels.backend_module("python").subset_closure(bits, sizes)

    k = max(10, int(20000 * scale))
    per = nprng.integers(0, 8, size=k)
    ptr = np.concatenate(([0], np.cumsum(per))).astype(np.int64)
    m = int(ptr[-1])
    diff = nprng.integers(1, 20, size=m).astype(np.int64)
    rows = nprng.integers(1, 10_000, size=m).astype(np.int64)
    ids = nprng.integers(0, 500, size=m).astype(np.int64)

    # 6 candidates per level over 4 dense nodes; 6^8 leaves at scale 1
    levels = 8 if scale >= 1 else 6
    optr = np.arange(0, 6 * levels + 1, 6, dtype=np.int64)
    dense_idx = nprng.integers(0, 4, size=6 * levels).astype(np.int64)
    weight = nprng.integers(1, 50, size=6 * levels).astype(np.float64)
    krows = nprng.integers(1, 100, size=levels).astype(np.float64)
    dense_rows = nprng.integers(100, 1000, size=4).astype(np.float64)

    values = nprng.integers(0, 2**40, size=max(1000, int(1_000_000 * scale)), dtype=np.uint64)
    blob = kernels.backend_module("python").varint_encode(values)

    nj = max(1000, int(300_000 * scale))
    build = nprng.integers(0, nj // 2, size=nj).astype(np.int64)
    probe = nprng.integers(0, nj // 2, size=nj).astype(np.int64)

    return {
        "subset_closure": (bits, sizes),
        "transitive_reduction": (len(sizes), src, dst),
        "greedy_assign": (ptr, diff, rows, ids),
        "optimal_search": (optr, dense_idx, weight, krows, dense_rows),
        "varint_encode": (values,),
        "varint_decode": (blob,),
        "hash_join_probe": (build, probe),
    }


def best_of(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="input size multiplier")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--only", nargs="*", help="kernel names to run")
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    cases = make_cases(args.scale)
    backends = kernels.available_backends()
    results = {}
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, case in cases.items():
        if args.only and name not in args.only:
            continue
        row = {b: best_of(getattr(kernels.backend_module(b), name), case, args.repeat) for b in backends}
        results[name] = row
        line = f"{name:<22}" + "".join(f"{row[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{row['python'] / row['cython']:>11.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"scale": args.scale, "seconds": results}, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
