# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``_pykernels``."""
import numpy as np

from libc.stdint cimport int64_t, uint64_t, uint8_t
from libcpp.vector cimport vector


def subset_closure(bits, sizes):
    cdef const uint64_t[:, ::1] b = np.ascontiguousarray(bits, dtype=np.uint64)
    cdef const int64_t[::1] sz = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t w = b.shape[1]
    cdef Py_ssize_t i, j, k
    cdef bint ok
    cdef vector[int64_t] out_i
    cdef vector[int64_t] out_j
    with nogil:
        for i in range(n):
            for j in range(n):
                if sz[j] <= sz[i]:
                    continue
                ok = True
                for k in range(w):
                    if b[i, k] & ~b[j, k]:
                        ok = False
                        break
                if ok:
                    out_i.push_back(i)
                    out_j.push_back(j)
    return _to_array(out_i), _to_array(out_j)


def transitive_reduction(Py_ssize_t n, src, dst):
    cdef const int64_t[::1] s = np.ascontiguousarray(src, dtype=np.int64)
    cdef const int64_t[::1] d = np.ascontiguousarray(dst, dtype=np.int64)
    cdef Py_ssize_t m = s.shape[0]
    cdef Py_ssize_t w = (n + 63) // 64
    desc_arr = np.zeros((max(n, 1), max(w, 1)), dtype=np.uint64)
    cdef uint64_t[:, ::1] desc = desc_arr
    cov_arr = np.zeros(max(w, 1), dtype=np.uint64)
    cdef uint64_t[::1] covered = cov_arr
    # CSR over sources; input need not be sorted
    order_arr = np.argsort(s, kind="stable").astype(np.int64)
    cdef const int64_t[::1] order = order_arr
    ptr_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] ptr = ptr_arr
    cdef Py_ssize_t e, a, c, q, kk
    cdef int64_t bnode
    cdef vector[int64_t] out_i
    cdef vector[int64_t] out_j
    kids_arr = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] kids = kids_arr
    with nogil:
        for e in range(m):
            desc[s[e], d[e] >> 6] |= (<uint64_t>1) << (d[e] & 63)
            ptr[s[e] + 1] += 1
        for a in range(n):
            ptr[a + 1] += ptr[a]
        for e in range(m):
            kids[e] = d[order[e]]
    # children of each node sorted ascending
    for a in range(n):
        kids_arr[ptr[a]:ptr[a + 1]].sort()
    with nogil:
        for a in range(n):
            for kk in range(w):
                covered[kk] = 0
            for q in range(ptr[a], ptr[a + 1]):
                c = kids[q]
                for kk in range(w):
                    covered[kk] |= desc[c, kk]
            for q in range(ptr[a], ptr[a + 1]):
                bnode = kids[q]
                if not (covered[bnode >> 6] >> (bnode & 63)) & 1:
                    out_i.push_back(a)
                    out_j.push_back(bnode)
    return _to_array(out_i), _to_array(out_j)


def greedy_assign(ptr, diff, rows, ids):
    cdef const int64_t[::1] p = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef const int64_t[::1] df = np.ascontiguousarray(diff, dtype=np.int64)
    cdef const int64_t[::1] rw = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const int64_t[::1] ix = np.ascontiguousarray(ids, dtype=np.int64)
    cdef Py_ssize_t k = p.shape[0] - 1
    choice_arr = np.full(max(k, 0), -1, dtype=np.int64)
    cdef int64_t[::1] choice = choice_arr
    cdef Py_ssize_t i, c
    cdef int64_t best, lhs, rhs
    cdef int64_t evaluations = 0
    with nogil:
        for i in range(k):
            best = -1
            for c in range(p[i], p[i + 1]):
                evaluations += 1
                if best < 0:
                    best = c
                    continue
                lhs = df[c] * rw[best]
                rhs = df[best] * rw[c]
                if lhs < rhs or (lhs == rhs and (rw[c] > rw[best] or (rw[c] == rw[best] and ix[c] < ix[best]))):
                    best = c
            choice[i] = best
    return choice_arr, int(evaluations)


cdef struct _Search:
    Py_ssize_t k
    Py_ssize_t d
    const int64_t* ptr
    const int64_t* dense
    const double* weight
    const double* krows
    double* num
    double* den
    int64_t* cur
    int64_t* best
    double best_cost
    int64_t visited


cdef void _dfs(_Search* st, Py_ssize_t level) noexcept nogil:
    cdef Py_ssize_t c, j
    cdef double old_num, old_den, total
    if level == st.k:
        st.visited += 1
        total = 0.0
        for j in range(st.d):
            total += st.num[j] / st.den[j]
        if total < st.best_cost:
            st.best_cost = total
            for j in range(st.k):
                st.best[j] = st.cur[j]
        return
    for c in range(st.ptr[level], st.ptr[level + 1]):
        j = st.dense[c]
        old_num = st.num[j]
        old_den = st.den[j]
        st.num[j] = old_num + st.weight[c]
        st.den[j] = old_den + st.krows[level]
        st.cur[level] = c
        _dfs(st, level + 1)
        st.num[j] = old_num
        st.den[j] = old_den


def optimal_search(ptr, dense_idx, weight, krows, dense_rows):
    ptr_arr = np.ascontiguousarray(ptr, dtype=np.int64)
    dense_arr = np.ascontiguousarray(dense_idx, dtype=np.int64)
    weight_arr = np.ascontiguousarray(weight, dtype=np.float64)
    krows_arr = np.ascontiguousarray(krows, dtype=np.float64)
    num_arr = np.zeros(len(dense_rows), dtype=np.float64)
    den_arr = np.ascontiguousarray(dense_rows, dtype=np.float64).copy()
    k = len(ptr_arr) - 1
    cur_arr = np.zeros(max(k, 1), dtype=np.int64)
    best_arr = np.full(max(k, 1), -1, dtype=np.int64)
    # pad empty buffers so taking &view[0] is always valid
    if len(dense_arr) == 0:
        dense_arr = np.zeros(1, dtype=np.int64)
        weight_arr = np.zeros(1, dtype=np.float64)
    if len(krows_arr) == 0:
        krows_arr = np.zeros(1, dtype=np.float64)
    if len(num_arr) == 0:
        return best_arr[:k], 0, float("inf")
    cdef int64_t[::1] v_ptr = ptr_arr
    cdef int64_t[::1] v_dense = dense_arr
    cdef double[::1] v_weight = weight_arr
    cdef double[::1] v_krows = krows_arr
    cdef double[::1] v_num = num_arr
    cdef double[::1] v_den = den_arr
    cdef int64_t[::1] v_cur = cur_arr
    cdef int64_t[::1] v_best = best_arr
    cdef _Search st
    st.k = k
    st.d = len(num_arr)
    st.ptr = &v_ptr[0]
    st.dense = &v_dense[0]
    st.weight = &v_weight[0]
    st.krows = &v_krows[0]
    st.num = &v_num[0]
    st.den = &v_den[0]
    st.cur = &v_cur[0]
    st.best = &v_best[0]
    st.best_cost = float("inf")
    st.visited = 0
    with nogil:
        _dfs(&st, 0)
    return best_arr[:k], int(st.visited), float(st.best_cost)


def varint_encode(values):
    cdef const uint64_t[::1] v = np.ascontiguousarray(values, dtype=np.uint64)
    cdef Py_ssize_t n = v.shape[0]
    out_arr = np.empty(n * 10, dtype=np.uint8)
    cdef uint8_t[::1] out = out_arr
    cdef Py_ssize_t i, pos = 0
    cdef uint64_t x
    with nogil:
        for i in range(n):
            x = v[i]
            while x >= 0x80:
                out[pos] = <uint8_t>((x & 0x7F) | 0x80)
                pos += 1
                x >>= 7
            out[pos] = <uint8_t>x
            pos += 1
    return out_arr[:pos].tobytes()


def varint_decode(buf):
    cdef const uint8_t[::1] b = np.frombuffer(bytes(buf), dtype=np.uint8) if len(buf) else np.zeros(0, dtype=np.uint8)
    cdef Py_ssize_t n = b.shape[0]
    out_arr = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    cdef Py_ssize_t i, cnt = 0
    cdef uint64_t x = 0
    cdef int shift = 0
    cdef bint pending = False
    cdef bint overflow = False
    with nogil:
        for i in range(n):
            if shift > 63:
                overflow = True
                break
            x |= (<uint64_t>(b[i] & 0x7F)) << shift
            if b[i] & 0x80:
                shift += 7
                pending = True
            else:
                out[cnt] = x
                cnt += 1
                x = 0
                shift = 0
                pending = False
    if overflow:
        raise ValueError("varint overflows 64 bits")
    if pending:
        raise ValueError("truncated varint stream")
    return out_arr[:cnt].copy()


cdef inline uint64_t _mix(uint64_t x) noexcept nogil:
    x ^= x >> 30
    x *= <uint64_t>0xbf58476d1ce4e5b9ULL
    x ^= x >> 27
    x *= <uint64_t>0x94d049bb133111ebULL
    x ^= x >> 31
    return x


def hash_join_probe(build, probe):
    cdef const int64_t[::1] bk = np.ascontiguousarray(build, dtype=np.int64)
    cdef const int64_t[::1] pk = np.ascontiguousarray(probe, dtype=np.int64)
    cdef Py_ssize_t nb = bk.shape[0]
    cdef Py_ssize_t np_ = pk.shape[0]
    cdef Py_ssize_t nbuckets = 1
    while nbuckets < 2 * nb:
        nbuckets <<= 1
    cdef uint64_t mask = nbuckets - 1
    head_arr = np.full(nbuckets, -1, dtype=np.int64)
    nxt_arr = np.full(max(nb, 1), -1, dtype=np.int64)
    cdef int64_t[::1] head = head_arr
    cdef int64_t[::1] nxt = nxt_arr
    cdef Py_ssize_t i, p
    cdef int64_t e
    cdef uint64_t h
    cdef vector[int64_t] out_p
    cdef vector[int64_t] out_b
    with nogil:
        # insert in reverse so chains iterate in ascending build order
        i = nb - 1
        while i >= 0:
            h = _mix(<uint64_t>bk[i]) & mask
            nxt[i] = head[h]
            head[h] = i
            i -= 1
        for p in range(np_):
            h = _mix(<uint64_t>pk[p]) & mask
            e = head[h]
            while e >= 0:
                if bk[e] == pk[p]:
                    out_p.push_back(p)
                    out_b.push_back(e)
                e = nxt[e]
    return _to_array(out_p), _to_array(out_b)


cdef _to_array(vector[int64_t]& vec):
    cdef Py_ssize_t n = vec.size()
    arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] view = arr
    cdef Py_ssize_t i
    for i in range(n):
        view[i] = vec[i]
    return arr
