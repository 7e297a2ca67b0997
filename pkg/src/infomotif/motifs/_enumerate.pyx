# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled connected-triple enumeration; same contract as ``_enumerate_py``."""
import numpy as np
cimport numpy as cnp

ctypedef cnp.int64_t i64


cdef inline bint has_edge(const i64[:] indptr, const i64[:] indices, i64 u, i64 v) noexcept nogil:
    cdef i64 lo = indptr[u], hi = indptr[u + 1], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[u + 1] and indices[lo] == v


cdef i64 _scan(const i64[:] uptr, const i64[:] uidx, const i64[:] optr, const i64[:] oidx,
               i64[:, :] triples, i64[:] codes, bint fill) noexcept nogil:
    cdef i64 n = uptr.shape[0] - 1
    cdef i64 u, i, j, v, w, a, b, c, t, count = 0
    cdef i64 code
    for u in range(n):
        for i in range(uptr[u], uptr[u + 1]):
            v = uidx[i]
            for j in range(i + 1, uptr[u + 1]):
                w = uidx[j]
                if u > v and has_edge(uptr, uidx, v, w):
                    continue
                if fill:
                    a = u; b = v; c = w
                    if a > b:
                        t = a; a = b; b = t
                    if b > c:
                        t = b; b = c; c = t
                    if a > b:
                        t = a; a = b; b = t
                    code = ((<i64>has_edge(optr, oidx, a, b) << 5)
                            | (<i64>has_edge(optr, oidx, a, c) << 4)
                            | (<i64>has_edge(optr, oidx, b, a) << 3)
                            | (<i64>has_edge(optr, oidx, b, c) << 2)
                            | (<i64>has_edge(optr, oidx, c, a) << 1)
                            | (<i64>has_edge(optr, oidx, c, b)))
                    triples[count, 0] = a
                    triples[count, 1] = b
                    triples[count, 2] = c
                    codes[count] = code
                count += 1
    return count


def enumerate_connected_triples(und_indptr, und_indices, out_indptr, out_indices):
    cdef const i64[:] uptr = np.ascontiguousarray(und_indptr, dtype=np.int64)
    cdef const i64[:] uidx = np.ascontiguousarray(und_indices, dtype=np.int64)
    cdef const i64[:] optr = np.ascontiguousarray(out_indptr, dtype=np.int64)
    cdef const i64[:] oidx = np.ascontiguousarray(out_indices, dtype=np.int64)
    cdef i64[:, :] tv = np.empty((0, 3), dtype=np.int64)
    cdef i64[:] cv = np.empty(0, dtype=np.int64)
    cdef i64 m
    with nogil:
        m = _scan(uptr, uidx, optr, oidx, tv, cv, False)
    triples = np.empty((m, 3), dtype=np.int64)
    codes = np.empty(m, dtype=np.int64)
    tv = triples
    cv = codes
    with nogil:
        _scan(uptr, uidx, optr, oidx, tv, cv, True)
    return triples, codes
