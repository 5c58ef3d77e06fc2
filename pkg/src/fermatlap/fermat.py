"""Discrete power-weighted shortest-path (Fermat) distances.

Distances are stored as l_p^p: the minimum over paths of the sum of
||x_i - x_j||^p over hops. The p-th root l_p is a metric for p >= 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import _kernels as K
from ._graph import SparseWeightedGraph
from .errors import ConfigError, DisconnectedGraph, DoubleNormalization, SizeCapExceeded
from .sampling import PointCloud

DEFAULT_CAP = 20000
BRUTE_KNN_MAX = 2000
DENSE_COST_MAX = 4000


@dataclass(frozen=True)
class FermatParams:
    p: float = 2.0
    m: int = 2
    mode: str = "exact"
    k: Optional[int] = None

    def __post_init__(self):
        if not self.p >= 1:
            raise ConfigError("p must be >= 1")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.mode not in ("exact", "knn"):
            raise ConfigError(f"mode must be exact or knn, got {self.mode!r}")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be >= 1")

    def knn_k(self, n: int) -> int:
        k = self.k if self.k is not None else default_k(n)
        return int(min(k, n - 1))


def default_k(n: int) -> int:
    return int(math.ceil(2 * math.log(n)))


@dataclass
class DistanceMatrix:
    """Pairwise l_p^p values.

    `values` is a dense n x n array, or a CSR matrix when a cutoff was used:
    then only off-diagonal pairs with value <= cutoff are stored, the diagonal
    is implicitly zero and missing pairs exceed the cutoff.
    """

    values: Union[np.ndarray, sp.csr_matrix]
    p: float
    m: int
    normalized: bool = False
    scale: float = 1.0
    cutoff: Optional[float] = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.values)

    def to_dense(self) -> np.ndarray:
        if not self.is_sparse:
            return np.array(self.values)
        out = np.full((self.n, self.n), np.inf)
        C = self.values.tocoo()
        out[C.row, C.col] = C.data
        np.fill_diagonal(out, 0.0)
        return out

    def root(self) -> np.ndarray:
        """Dense l_p (the p-th root)."""
        return self.to_dense() ** (1.0 / self.p)

    def header(self) -> dict:
        return {"p": self.p, "m": self.m, "n": self.n, "normalized": self.normalized, "scale": self.scale}

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("# " + json.dumps(self.header()) + "\n")
            if self.is_sparse:
                f.write("i,j,value\n")
                U = sp.triu(self.values, k=1).tocoo()
                for a in np.lexsort((U.col, U.row)):
                    f.write(f"{U.row[a]},{U.col[a]},{U.data[a]:.17g}\n")
            else:
                for row in self.values:
                    f.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @staticmethod
    def from_csv(path) -> "DistanceMatrix":
        with open(path) as f:
            head = json.loads(f.readline()[1:])
            first = f.readline()
            body = [first] + f.readlines()
        n = int(head["n"])
        kw = dict(p=float(head["p"]), m=int(head["m"]), normalized=bool(head["normalized"]), scale=float(head["scale"]))
        if first.startswith("i,j"):
            rows = [ln.split(",") for ln in body[1:] if ln.strip()]
            i = np.array([int(r[0]) for r in rows], dtype=np.int64)
            j = np.array([int(r[1]) for r in rows], dtype=np.int64)
            v = np.array([float(r[2]) for r in rows])
            M = sp.csr_matrix((np.concatenate([v, v]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
            return DistanceMatrix(M, cutoff=float(v.max()) if len(v) else 0.0, **kw)
        vals = np.array([[float(x) for x in ln.split(",")] for ln in body if ln.strip()])
        return DistanceMatrix(vals.reshape(n, n), **kw)


def _points(cloud) -> np.ndarray:
    X = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.ascontiguousarray(X, dtype=float)


def _knn_lists(X: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest neighbours of every point, ties broken by index."""
    n = len(X)
    if n > BRUTE_KNN_MAX:
        _, idx = cKDTree(X).query(X, k=k + 1)
        out = np.empty((n, k), dtype=np.int64)
        for i in range(n):
            row = idx[i][idx[i] != i]
            out[i] = row[:k]
        return out
    out = np.empty((n, k), dtype=np.int64)
    sq = np.einsum("ij,ij->i", X, X)
    for lo in range(0, n, 512):
        hi = min(n, lo + 512)
        D = sq[lo:hi, None] + sq[None, :] - 2 * X[lo:hi] @ X.T
        # exact squared distances on the candidate set to avoid cancellation error
        for r in range(hi - lo):
            i = lo + r
            cand = np.argpartition(D[r], min(k + 8, n - 1))[: min(k + 9, n)]
            cand = cand[cand != i]
            d = np.sum((X[cand] - X[i]) ** 2, axis=1)
            order = np.lexsort((cand, d))
            # widen the candidate set if the k-th distance could tie outside it
            if len(cand) < n - 1 and d[order[-1]] <= d[order[k - 1]] * (1 + 1e-9):
                cand = np.delete(np.arange(n), i)
                d = np.sum((X[cand] - X[i]) ** 2, axis=1)
                order = np.lexsort((cand, d))
            out[i] = cand[order[:k]]
    return out


def knn_graph(cloud, k: int) -> SparseWeightedGraph:
    """Symmetrized k-NN graph (edge if either end lists the other) with Euclidean lengths."""
    X = _points(cloud)
    n = len(X)
    if not 1 <= k < n:
        raise ConfigError(f"need 1 <= k < n, got k={k}, n={n}")
    nb = _knn_lists(X, k)
    rows = np.repeat(np.arange(n), k)
    cols = nb.ravel()
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    key = np.unique(lo * n + hi)
    i, j = key // n, key % n
    lens = np.sqrt(np.sum((X[i] - X[j]) ** 2, axis=1))
    return SparseWeightedGraph.from_upper(n, i, j, lens, meta={"k": k, "kind": "knn"})


def _radius_edges(X: np.ndarray, radius: float):
    pairs = cKDTree(X).query_pairs(radius * (1 + 1e-12), output_type="ndarray")
    if len(pairs) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    i, j = pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64)
    return i, j, np.sqrt(np.sum((X[i] - X[j]) ** 2, axis=1))


def _csr_from_edges(n, i, j, lens, p):
    w = lens ** p
    G = sp.csr_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    G.sort_indices()
    return G


def _knn_csr(X: np.ndarray, params: FermatParams):
    n = len(X)
    k = params.knn_k(n)
    for attempt in range(2):
        g = knn_graph(X, k).off_diagonal()
        ncomp, _ = connected_components(g, directed=False)
        if ncomp == 1:
            G = g.copy()
            G.data = G.data ** params.p
            return G, k
        if attempt == 0 and k < n - 1:
            k = min(2 * k, n - 1)
        else:
            break
    raise DisconnectedGraph(f"k-NN graph has {ncomp} components at k={k}")


def fermat_sssp(cloud, params: FermatParams, source) -> np.ndarray:
    """l_p^p from one source to every point.

    `source` is a point index, or a point in R^D which is then added to the
    cloud as an extra vertex (it is excluded from the returned vector).
    """
    X = _points(cloud)
    n0 = len(X)
    src = np.asarray(source)
    if src.ndim == 0 and np.issubdtype(src.dtype, np.integer):
        s = int(src)
        if not 0 <= s < n0:
            raise ConfigError(f"source index {s} out of range")
    else:
        pt = np.asarray(source, dtype=float).reshape(1, -1)
        if pt.shape[1] != X.shape[1]:
            raise ConfigError("source point dimension mismatch")
        X = np.vstack([X, pt])
        s = n0
    if len(X) < 2:
        raise ConfigError("need at least 2 points")
    if params.mode == "exact":
        d = K.sssp_complete(X, float(params.p), s, np.inf, -1)
    else:
        G, _ = _knn_csr(X, params)
        d = K.sssp_one(G.indptr, G.indices.astype(np.int64), G.data, s, np.inf, -1)
        if not np.all(np.isfinite(d)):
            raise DisconnectedGraph("unreachable target in k-NN mode")
    return d[:n0]


def pairwise_cost(X: np.ndarray, p: float) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return sq if p == 2 else np.sqrt(sq) ** p


def fermat_pairwise(cloud, params: FermatParams, cutoff: Optional[float] = None,
                    cap: int = DEFAULT_CAP) -> DistanceMatrix:
    """All-pairs l_p^p.

    Without a cutoff the result is dense. With a cutoff only pairs with
    l_p^p <= cutoff are computed and the result is sparse; in exact mode the
    search then runs on the radius graph {||x_i - x_j||^p <= cutoff}, which
    holds every hop of every path of cost <= cutoff, so it stays exact.
    """
    X = _points(cloud)
    n = len(X)
    if n > cap:
        raise SizeCapExceeded(f"n={n} exceeds cap {cap}")
    if n < 2:
        raise ConfigError("need at least 2 points")
    p = float(params.p)
    if cutoff is None:
        if params.mode == "exact":
            out = np.full((n, n), np.inf)
            if n <= DENSE_COST_MAX:
                K.all_pairs_complete(pairwise_cost(X, p), out)
            else:
                for s in range(n):
                    out[s, s + 1:] = K.sssp_complete(X, p, s, np.inf, -1)[s + 1:]
                out = np.triu(out, 1)
                out = out + out.T
        else:
            G, _ = _knn_csr(X, params)
            out = np.full((n, n), np.inf)
            K.all_sources_dense(G.indptr, G.indices.astype(np.int64), G.data, out)
        return DistanceMatrix(out, p, int(params.m))
    cutoff = float(cutoff)
    if params.mode == "exact":
        i, j, lens = _radius_edges(X, cutoff ** (1.0 / p))
        if p == 1.0:
            # the direct hop is optimal, by the triangle inequality
            keep = lens <= cutoff
            i, j, v = i[keep], j[keep], lens[keep]
        else:
            G = _csr_from_edges(n, i, j, lens, p)
            i, j, v = K.all_sources_cutoff(G.indptr, G.indices.astype(np.int64), G.data, cutoff)
    else:
        G, _ = _knn_csr(X, params)
        i, j, v = K.all_sources_cutoff(G.indptr, G.indices.astype(np.int64), G.data, cutoff)
    M = sp.csr_matrix((np.concatenate([v, v]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    M.sort_indices()
    return DistanceMatrix(M, p, int(params.m), cutoff=cutoff)


def fermat_scale(n: int, p: float, m: int) -> float:
    return float(n) ** ((p - 1.0) / m)


def normalize_fermat(dm: DistanceMatrix, n: int, params: FermatParams) -> DistanceMatrix:
    """Multiply by n^((p-1)/m)."""
    if dm.normalized:
        raise DoubleNormalization("distance matrix is already normalized")
    c = fermat_scale(n, params.p, params.m)
    vals = dm.values * c if dm.is_sparse else dm.values * c
    cut = None if dm.cutoff is None else dm.cutoff * c
    return replace(dm, values=sp.csr_matrix(vals) if dm.is_sparse else vals, normalized=True, scale=c, cutoff=cut)


def floyd_warshall(points, p: float) -> np.ndarray:
    """O(n^3) all-pairs oracle on the complete graph with costs ||x_i - x_j||^p."""
    X = _points(points)
    D = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2) ** p
    for k in range(len(X)):
        np.minimum(D, D[:, k, None] + D[None, k, :], out=D)
    return D
