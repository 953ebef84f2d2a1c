"""Pure-Python/numpy implementations of the hot kernels.

These define the reference semantics; the compiled module must produce
identical outputs (including ordering) for identical inputs.
"""
from __future__ import annotations

import numpy as np

_U64 = np.uint64
_I64 = np.int64


def subset_closure(bits: np.ndarray, sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All pairs ``(i, j)`` whose bitset ``i`` is a strict subset of ``j``.

    ``bits`` is an ``(n, w)`` uint64 matrix, ``sizes`` the popcount per row.
    Pairs are returned sorted by ``i`` then ``j``.
    """
    bits = np.ascontiguousarray(bits, dtype=_U64)
    sizes = np.asarray(sizes, dtype=_I64)
    n = bits.shape[0]
    src: list[np.ndarray] = []
    dst: list[np.ndarray] = []
    for i in range(n):
        larger = sizes > sizes[i]
        if not larger.any():
            continue
        cand = np.flatnonzero(larger)
        outside = bits[i] & ~bits[cand]
        hit = cand[~outside.any(axis=1)]
        if hit.size:
            src.append(np.full(hit.size, i, dtype=_I64))
            dst.append(hit.astype(_I64))
    if not src:
        return np.empty(0, _I64), np.empty(0, _I64)
    return np.concatenate(src), np.concatenate(dst)


def transitive_reduction(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Transitive reduction of a transitively closed DAG given as an edge list."""
    desc = [0] * n
    children: list[list[int]] = [[] for _ in range(n)]
    for a, b in zip(src.tolist(), dst.tolist()):
        desc[a] |= 1 << b
        children[a].append(b)
    out_src: list[int] = []
    out_dst: list[int] = []
    for a in range(n):
        kids = sorted(children[a])
        covered = 0
        for c in kids:
            covered |= desc[c]
        for b in kids:
            if not (covered >> b) & 1:
                out_src.append(a)
                out_dst.append(b)
    return np.asarray(out_src, dtype=_I64), np.asarray(out_dst, dtype=_I64)


def greedy_assign(
    ptr: np.ndarray, diff: np.ndarray, rows: np.ndarray, ids: np.ndarray
) -> tuple[np.ndarray, int]:
    """Pick, per non-dense node, the candidate with minimal ``diff / rows``.

    Candidates of node ``k`` occupy ``ptr[k]:ptr[k+1]``.  Ratios are compared
    exactly by cross-multiplication; ties go to larger ``rows`` and then to the
    smaller ``ids``.  Returns the chosen candidate position (or -1) per node and
    the number of candidates evaluated.
    """
    ptr_l = ptr.tolist()
    diff_l = diff.tolist()
    rows_l = rows.tolist()
    ids_l = ids.tolist()
    k = len(ptr_l) - 1
    choice = [-1] * k
    evaluations = 0
    for i in range(k):
        best = -1
        for c in range(ptr_l[i], ptr_l[i + 1]):
            evaluations += 1
            if best < 0:
                best = c
                continue
            lhs = diff_l[c] * rows_l[best]
            rhs = diff_l[best] * rows_l[c]
            if lhs < rhs or (
                lhs == rhs
                and (rows_l[c] > rows_l[best] or (rows_l[c] == rows_l[best] and ids_l[c] < ids_l[best]))
            ):
                best = c
        choice[i] = best
    return np.asarray(choice, dtype=_I64), evaluations


def optimal_search(
    ptr: np.ndarray,
    dense_idx: np.ndarray,
    weight: np.ndarray,
    krows: np.ndarray,
    dense_rows: np.ndarray,
) -> tuple[np.ndarray, int, float]:
    """Exhaustive search over every assignment of non-dense nodes to dense ones.

    Assignments are visited in ``itertools.product`` order.  A strictly
    smaller cost replaces the incumbent, so the first minimum wins.  Returns
    the chosen candidate position per node, the number of assignments visited
    and the best cost.
    """
    ptr_l = ptr.tolist()
    dense_l = dense_idx.tolist()
    weight_l = weight.tolist()
    krows_l = krows.tolist()
    k = len(ptr_l) - 1
    d = len(dense_rows)
    num = [0.0] * d
    den = [float(x) for x in dense_rows.tolist()]
    cur = [0] * k
    best = [-1] * k
    best_cost = float("inf")
    visited = 0

    def leaf():
        nonlocal best_cost, visited
        visited += 1
        total = 0.0
        for j in range(d):
            total += num[j] / den[j]
        if total < best_cost:
            best_cost = total
            best[:] = cur

    def dfs(level):
        if level == k:
            leaf()
            return
        rk = krows_l[level]
        for c in range(ptr_l[level], ptr_l[level + 1]):
            j = dense_l[c]
            old_num, old_den = num[j], den[j]
            num[j] = old_num + weight_l[c]
            den[j] = old_den + rk
            cur[level] = c
            dfs(level + 1)
            num[j], den[j] = old_num, old_den

    if d:
        dfs(0)
    return np.asarray(best, dtype=_I64), visited, best_cost


def varint_encode(values: np.ndarray) -> bytes:
    """LEB128-encode a sequence of unsigned 64-bit integers."""
    out = bytearray()
    for v in np.asarray(values, dtype=_U64).tolist():
        while v >= 0x80:
            out.append((v & 0x7F) | 0x80)
            v >>= 7
        out.append(v)
    return bytes(out)


def varint_decode(buf: bytes) -> np.ndarray:
    """Inverse of :func:`varint_encode`; raises ``ValueError`` on truncation."""
    out: list[int] = []
    v = 0
    shift = 0
    pending = False
    for byte in buf:
        if shift > 63:
            raise ValueError("varint overflows 64 bits")
        v |= (byte & 0x7F) << shift
        if byte & 0x80:
            shift += 7
            pending = True
        else:
            out.append(v)
            v = 0
            shift = 0
            pending = False
    if pending:
        raise ValueError("truncated varint stream")
    return np.asarray(out, dtype=_U64)


def hash_join_probe(build: np.ndarray, probe: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Equi-join two int64 key arrays.

    Returns ``(probe_idx, build_idx)`` ordered by probe index, then build index.
    """
    table: dict[int, list[int]] = {}
    for i, key in enumerate(build.tolist()):
        table.setdefault(key, []).append(i)
    out_p: list[int] = []
    out_b: list[int] = []
    for p, key in enumerate(probe.tolist()):
        hits = table.get(key)
        if hits:
            out_p.extend([p] * len(hits))
            out_b.extend(hits)
    return np.asarray(out_p, dtype=_I64), np.asarray(out_b, dtype=_I64)
