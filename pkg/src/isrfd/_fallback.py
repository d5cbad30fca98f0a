"""Pure-Python/NumPy implementations of the hot kernels.

Signatures mirror :mod:`isrfd._ext` exactly; the backend selector in
:mod:`isrfd._backend` decides which one is used.
"""

from itertools import combinations

import numpy as np


def degeneracy_order(adj):
    """Vertex order obtained by repeatedly removing a minimum-degree vertex."""
    adj = np.asarray(adj, dtype=bool)
    n = len(adj)
    deg = adj.sum(axis=1).astype(np.int64)
    removed = np.zeros(n, dtype=bool)
    order = []
    for _ in range(n):
        masked = np.where(removed, np.iinfo(np.int64).max, deg)
        v = int(np.argmin(masked))
        order.append(v)
        removed[v] = True
        deg -= adj[v]
    return np.array(order, dtype=np.int64)


def k_cliques(adj, k):
    """All k-cliques of the graph as a lexicographically sorted (N, k) array."""
    adj = np.asarray(adj, dtype=bool)
    n = len(adj)
    if k < 1:
        raise ValueError("k must be positive")
    order = degeneracy_order(adj)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    # forward neighbours in degeneracy order: every clique is found once,
    # from its lowest-ranked vertex
    nbrs = [set(np.flatnonzero(adj[v]).tolist()) for v in range(n)]
    out = []

    def expand(prefix, cands, depth):
        if depth == k:
            out.append(prefix)
            return
        for idx, v in enumerate(cands):
            if len(cands) - idx < k - depth:
                break
            if depth + 1 == k:
                out.append(prefix + (v,))
                continue
            nxt = [u for u in cands[idx + 1:] if u in nbrs[v]]
            if len(nxt) >= k - depth - 1:
                expand(prefix + (v,), nxt, depth + 1)

    for v in order.tolist():
        fwd = sorted((u for u in nbrs[v] if rank[u] > rank[v]), key=lambda u: rank[u])
        if k == 1:
            out.append((v,))
        elif len(fwd) >= k - 1:
            expand((v,), fwd, 1)
    if not out:
        return np.empty((0, k), dtype=np.int64)
    arr = np.sort(np.array(out, dtype=np.int64), axis=1)
    return arr[np.lexsort(arr.T[::-1])]


def fault_detectable_5(measured):
    """5-subsets in which every member has a measured edge to another member."""
    measured = np.asarray(measured, dtype=bool)
    active = np.flatnonzero(measured.any(axis=1)).tolist()
    out = []
    for combo in combinations(active, 5):
        sub = measured[np.ix_(combo, combo)]
        if sub.any(axis=1).all():
            out.append(combo)
    if not out:
        return np.empty((0, 5), dtype=np.int64)
    return np.array(out, dtype=np.int64)


def scale_squared(U, V, W):
    """Batched noise-subspace scale.

    For each batch entry returns
    ``sum_{a,b} sum_{i<j} W_ij (U_ia V_jb + U_ja V_ib)^2``.
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    T = np.einsum("kia,kjb->kijab", U, V)
    T = T + T.transpose(0, 2, 1, 3, 4)
    n = W.shape[-1]
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    return np.einsum("kij,kij->k", W * upper, np.sum(T * T, axis=(3, 4)))
