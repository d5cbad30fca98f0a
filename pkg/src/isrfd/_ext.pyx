# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Pure-Python twins live in ``isrfd._fallback``."""

from libc.stdlib cimport free, realloc
from libc.string cimport memcpy

import numpy as np
cimport numpy as cnp

cnp.import_array()


def degeneracy_order(adj_in):
    cdef cnp.uint8_t[:, :] adj = np.ascontiguousarray(adj_in, dtype=np.uint8)
    cdef Py_ssize_t n = adj.shape[0]
    cdef cnp.int64_t[:] deg = np.zeros(n, dtype=np.int64)
    cdef cnp.uint8_t[:] removed = np.zeros(n, dtype=np.uint8)
    cdef cnp.int64_t[:] order = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, j, step, best
    cdef cnp.int64_t bestdeg
    for i in range(n):
        for j in range(n):
            deg[i] += adj[i, j] != 0
    for step in range(n):
        best = -1
        bestdeg = 0
        for i in range(n):
            if not removed[i] and (best < 0 or deg[i] < bestdeg):
                best = i
                bestdeg = deg[i]
        order[step] = best
        removed[best] = 1
        for j in range(n):
            if adj[best, j]:
                deg[j] -= 1
    return np.asarray(order)


cdef struct Buffer:
    cnp.int64_t *data
    Py_ssize_t size
    Py_ssize_t cap


cdef int _push(Buffer *buf, cnp.int64_t[:] stack, int k) except -1:
    cdef Py_ssize_t i
    cdef cnp.int64_t *grown
    if buf.size + k > buf.cap:
        buf.cap = 2 * buf.cap + 16 * k
        grown = <cnp.int64_t *> realloc(buf.data, buf.cap * sizeof(cnp.int64_t))
        if grown == NULL:
            raise MemoryError()
        buf.data = grown
    for i in range(k):
        buf.data[buf.size + i] = stack[i]
    buf.size += k
    return 0


cdef int _expand(cnp.uint8_t[:, :] adj, cnp.int64_t[:, :] cand,
                 cnp.int64_t[:] ncand, cnp.int64_t[:] stack,
                 int depth, int k, Buffer *buf) except -1:
    cdef Py_ssize_t idx, jdx, m
    cdef cnp.int64_t v, u
    cdef Py_ssize_t nc = ncand[depth]
    for idx in range(nc):
        if nc - idx < k - depth:
            break
        v = cand[depth, idx]
        stack[depth] = v
        if depth + 1 == k:
            _push(buf, stack, k)
            continue
        m = 0
        for jdx in range(idx + 1, nc):
            u = cand[depth, jdx]
            if adj[v, u]:
                cand[depth + 1, m] = u
                m += 1
        if m >= k - depth - 1:
            ncand[depth + 1] = m
            _expand(adj, cand, ncand, stack, depth + 1, k, buf)
    return 0


def k_cliques(adj_in, int k):
    if k < 1:
        raise ValueError("k must be positive")
    cdef cnp.uint8_t[:, :] adj = np.ascontiguousarray(adj_in, dtype=np.uint8)
    cdef Py_ssize_t n = adj.shape[0]
    order_arr = degeneracy_order(adj_in)
    cdef cnp.int64_t[:] order = order_arr
    cdef Py_ssize_t i, j, m
    cdef cnp.int64_t v
    cdef cnp.int64_t[:, :] cand = np.empty((k + 1, n + 1), dtype=np.int64)
    cdef cnp.int64_t[:] ncand = np.zeros(k + 1, dtype=np.int64)
    cdef cnp.int64_t[:] stack = np.zeros(k + 1, dtype=np.int64)
    cdef Buffer buf
    buf.data = NULL
    buf.size = 0
    buf.cap = 0
    try:
        for i in range(n):
            v = order[i]
            stack[0] = v
            if k == 1:
                _push(&buf, stack, 1)
                continue
            # forward neighbours, already in degeneracy order
            m = 0
            for j in range(i + 1, n):
                if adj[v, order[j]]:
                    cand[1, m] = order[j]
                    m += 1
            if m >= k - 1:
                ncand[1] = m
                _expand(adj, cand, ncand, stack, 1, k, &buf)
        arr = np.empty((buf.size // k, k), dtype=np.int64)
        if buf.size:
            memcpy(cnp.PyArray_DATA(arr), buf.data, buf.size * sizeof(cnp.int64_t))
    finally:
        free(buf.data)
    if len(arr) == 0:
        return arr
    arr.sort(axis=1)
    return arr[np.lexsort(arr.T[::-1])]


def fault_detectable_5(measured_in):
    cdef cnp.uint8_t[:, :] adj = np.ascontiguousarray(measured_in, dtype=np.uint8)
    cdef Py_ssize_t n = adj.shape[0]
    cdef Py_ssize_t i, j, na = 0
    cdef cnp.int64_t[:] active = np.empty(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if adj[i, j]:
                active[na] = i
                na += 1
                break
    cdef Py_ssize_t a, b, c, d, e, p, q
    cdef cnp.int64_t s[5]
    cdef bint ok, hit
    cdef list out = []
    for a in range(na):
        s[0] = active[a]
        for b in range(a + 1, na):
            s[1] = active[b]
            for c in range(b + 1, na):
                s[2] = active[c]
                for d in range(c + 1, na):
                    s[3] = active[d]
                    for e in range(d + 1, na):
                        s[4] = active[e]
                        ok = True
                        for p in range(5):
                            hit = False
                            for q in range(5):
                                if adj[s[p], s[q]]:
                                    hit = True
                                    break
                            if not hit:
                                ok = False
                                break
                        if ok:
                            out.append((s[0], s[1], s[2], s[3], s[4]))
    if not out:
        return np.empty((0, 5), dtype=np.int64)
    return np.array(out, dtype=np.int64)


def scale_squared(U_in, V_in, W_in):
    cdef double[:, :, :] U = np.ascontiguousarray(U_in, dtype=np.float64)
    cdef double[:, :, :] V = np.ascontiguousarray(V_in, dtype=np.float64)
    cdef double[:, :, :] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef Py_ssize_t nb = U.shape[0], n = U.shape[1], p = U.shape[2]
    out_arr = np.zeros(nb, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t kk, i, j, a, b
    cdef double acc, t, w
    for kk in range(nb):
        acc = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                w = W[kk, i, j]
                if w == 0.0:
                    continue
                for a in range(p):
                    for b in range(p):
                        t = U[kk, i, a] * V[kk, j, b] + U[kk, j, a] * V[kk, i, b]
                        acc += w * t * t
        out[kk] = acc
    return out_arr
