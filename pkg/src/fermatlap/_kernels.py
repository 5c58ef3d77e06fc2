"""Compiled shortest-path kernels.

Binary heap with lazy deletion; heap order is lexicographic in (distance, node)
so ties are broken by node index and every run is deterministic.
"""
import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True, inline="always")
def _before(k1, v1, k2, v2):
    return k1 < k2 or (k1 == k2 and v1 < v2)


@njit(cache=True)
def _push(hk, hv, size, key, val):
    i = size
    hk[i] = key
    hv[i] = val
    while i > 0:
        par = (i - 1) >> 1
        if _before(hk[i], hv[i], hk[par], hv[par]):
            hk[i], hk[par] = hk[par], hk[i]
            hv[i], hv[par] = hv[par], hv[i]
            i = par
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(hk, hv, size):
    key = hk[0]
    val = hv[0]
    size -= 1
    hk[0] = hk[size]
    hv[0] = hv[size]
    i = 0
    while True:
        a = 2 * i + 1
        if a >= size:
            break
        b = a + 1
        c = a
        if b < size and _before(hk[b], hv[b], hk[a], hv[a]):
            c = b
        if _before(hk[c], hv[c], hk[i], hv[i]):
            hk[i], hk[c] = hk[c], hk[i]
            hv[i], hv[c] = hv[c], hv[i]
            i = c
        else:
            break
    return key, val, size


@njit(cache=True)
def sssp_csr(indptr, indices, w, src, cutoff, target, dist, done, hk, hv, touched):
    """Dijkstra from `src` on a CSR graph.

    On entry `dist` is +inf and `done` is False everywhere. Nodes are settled
    while their distance is <= cutoff; the search stops early once `target`
    (if >= 0) is settled. Returns the number of touched nodes listed in
    `touched`; only entries with done[v] carry final distances.
    """
    nt = 0
    dist[src] = 0.0
    touched[nt] = src
    nt += 1
    size = _push(hk, hv, 0, 0.0, src)
    while size > 0:
        d, u, size = _pop(hk, hv, size)
        if done[u]:
            continue
        if d > cutoff:
            break
        done[u] = True
        if u == target:
            break
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if done[v]:
                continue
            nd = d + w[e]
            if nd < dist[v]:
                if dist[v] == INF:
                    touched[nt] = v
                    nt += 1
                dist[v] = nd
                size = _push(hk, hv, size, nd, v)
    return nt


@njit(cache=True)
def all_sources_dense(indptr, indices, w, out):
    """Fill `out` (n x n, +inf) with all-pairs distances; upper triangle mirrored."""
    n = len(indptr) - 1
    dist = np.full(n, INF)
    done = np.zeros(n, dtype=np.bool_)
    cap = len(indices) + 1
    hk = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    for s in range(n):
        nt = sssp_csr(indptr, indices, w, s, INF, -1, dist, done, hk, hv, touched)
        out[s, s] = 0.0
        for a in range(nt):
            t = touched[a]
            if done[t] and t > s:
                out[s, t] = dist[t]
                out[t, s] = dist[t]
            dist[t] = INF
            done[t] = False
    return out


@njit(cache=True)
def all_sources_cutoff(indptr, indices, w, cutoff):
    """Triplets (i, j, d) with i < j and d <= cutoff."""
    n = len(indptr) - 1
    dist = np.full(n, INF)
    done = np.zeros(n, dtype=np.bool_)
    cap = len(indices) + 1
    hk = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    size = 1024
    ri = np.empty(size, dtype=np.int64)
    rj = np.empty(size, dtype=np.int64)
    rd = np.empty(size)
    cnt = 0
    for s in range(n):
        nt = sssp_csr(indptr, indices, w, s, cutoff, -1, dist, done, hk, hv, touched)
        for a in range(nt):
            t = touched[a]
            if done[t] and t > s:
                if cnt == size:
                    size *= 2
                    ri2 = np.empty(size, dtype=np.int64)
                    rj2 = np.empty(size, dtype=np.int64)
                    rd2 = np.empty(size)
                    ri2[:cnt] = ri[:cnt]
                    rj2[:cnt] = rj[:cnt]
                    rd2[:cnt] = rd[:cnt]
                    ri, rj, rd = ri2, rj2, rd2
                ri[cnt] = s
                rj[cnt] = t
                rd[cnt] = dist[t]
                cnt += 1
            dist[t] = INF
            done[t] = False
    return ri[:cnt], rj[:cnt], rd[:cnt]


@njit(cache=True)
def sssp_one(indptr, indices, w, src, cutoff, target):
    n = len(indptr) - 1
    dist = np.full(n, INF)
    done = np.zeros(n, dtype=np.bool_)
    cap = len(indices) + 1
    hk = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    sssp_csr(indptr, indices, w, src, cutoff, target, dist, done, hk, hv, touched)
    for v in range(n):
        if not done[v]:
            dist[v] = INF
    return dist


@njit(cache=True)
def _edge(X, u, v, p):
    s = 0.0
    for a in range(X.shape[1]):
        t = X[u, a] - X[v, a]
        s += t * t
    if p == 2.0:
        return s
    return np.sqrt(s) ** p


@njit(cache=True)
def sssp_complete(X, p, src, cutoff, target):
    """O(n^2) Dijkstra on the complete graph with edge cost ||xu - xv||^p.

    Array scan instead of a heap: with n - 1 edges per node this is optimal.
    The scan takes the first minimum, which is the lexicographic tie-break.
    """
    n = X.shape[0]
    dist = np.full(n, INF)
    done = np.zeros(n, dtype=np.bool_)
    dist[src] = 0.0
    for _ in range(n):
        u = -1
        best = INF
        for v in range(n):
            if not done[v] and dist[v] < best:
                best = dist[v]
                u = v
        if u < 0 or best > cutoff:
            break
        done[u] = True
        if u == target:
            break
        for v in range(n):
            if not done[v]:
                nd = best + _edge(X, u, v, p)
                if nd < dist[v]:
                    dist[v] = nd
    for v in range(n):
        if not done[v]:
            dist[v] = INF
    return dist


@njit(cache=True)
def all_pairs_complete(C, out):
    """All-pairs Dijkstra on a complete graph given its dense cost matrix C."""
    n = C.shape[0]
    dist = np.empty(n)
    done = np.zeros(n, dtype=np.bool_)
    for s in range(n):
        dist[:] = INF
        done[:] = False
        dist[s] = 0.0
        for _ in range(n):
            u = -1
            best = INF
            for v in range(n):
                if not done[v] and dist[v] < best:
                    best = dist[v]
                    u = v
            if u < 0:
                break
            done[u] = True
            row = C[u]
            for v in range(n):
                if not done[v]:
                    nd = best + row[v]
                    if nd < dist[v]:
                        dist[v] = nd
        out[s, s] = 0.0
        for t in range(s + 1, n):
            out[s, t] = dist[t]
            out[t, s] = dist[t]
    return out
