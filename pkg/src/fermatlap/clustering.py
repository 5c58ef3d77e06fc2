"""k-means and the two spectral clustering pipelines."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, EmptyCluster, FermatError, StageError, TooManyClusters
from .fermat import FermatParams, _points, _radius_edges, fermat_pairwise, fermat_scale, normalize_fermat
from .graph_laplacian import LaplacianSpec, build_weights
from .rng import stream
from .sampling import PointCloud
from .spectral import SpectralDecomposition, eig_smallest

N_INIT = 10
DRIFT_TOL = 1e-9


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    inertia: float
    seed: int
    iterations: int
    history: list = field(default_factory=list)
    restart: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("index,label\n")
            for i, l in enumerate(self.labels):
                f.write(f"{i},{int(l)}\n")


def _sqdist(X, C):
    return np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)


def _plusplus(X, k, rng):
    n = len(X)
    idx = [int(rng.integers(n))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        tot = d2.sum()
        if tot <= 0:
            return None
        c = int(np.searchsorted(np.cumsum(d2), rng.random() * tot, side="right"))
        c = min(c, n - 1)
        idx.append(c)
        d2 = np.minimum(d2, np.sum((X - X[c]) ** 2, axis=1))
    return X[idx].copy()


def _lloyd(X, C, max_iter):
    history = []
    for it in range(1, max_iter + 1):
        D = _sqdist(X, C)
        lab = np.argmin(D, axis=1)
        history.append(float(D[np.arange(len(X)), lab].sum()))
        counts = np.bincount(lab, minlength=len(C))
        if np.any(counts == 0):
            return None
        Cn = np.zeros_like(C)
        np.add.at(Cn, lab, X)
        Cn /= counts[:, None]
        drift = float(np.max(np.linalg.norm(Cn - C, axis=1)))
        C = Cn
        if drift < DRIFT_TOL:
            break
    D = _sqdist(X, C)
    lab = np.argmin(D, axis=1)
    if np.any(np.bincount(lab, minlength=len(C)) == 0):
        return None
    inertia = float(D[np.arange(len(X)), lab].sum())
    history.append(inertia)
    return lab, inertia, it, history


def _canonical(lab):
    """Relabel clusters in order of first appearance."""
    _, first = np.unique(lab, return_index=True)
    order = np.argsort(first)
    remap = np.empty(lab.max() + 1, dtype=np.int64)
    remap[np.unique(lab)[order]] = np.arange(len(order))
    return remap[lab]


def kmeans(embedding, k: int, seed: int, max_iter: int = 300, n_init: int = N_INIT) -> ClusterAssignment:
    """k-means++ seeding then Lloyd iterations; best of n_init restarts by inertia."""
    X = np.asarray(embedding, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n, got k={k}, n={n}")
    best = None
    for r in range(n_init):
        rng = stream(seed, r)
        C = _plusplus(X, k, rng)
        if C is None:
            continue
        out = _lloyd(X, C, max_iter)
        if out is None:
            continue
        lab, inertia, it, hist = out
        if best is None or inertia < best.inertia:
            best = ClusterAssignment(_canonical(lab), inertia, seed, it, hist, r)
    if best is None:
        raise EmptyCluster(f"every one of {n_init} restarts produced an empty cluster")
    return best


def accuracy(labels, reference) -> float:
    """Best matching fraction over relabelings (k <= 8)."""
    a = np.asarray(labels)
    b = np.asarray(reference)
    if a.shape != b.shape:
        raise ConfigError("label vectors must have equal length")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    k = max(len(ua), len(ub))
    if k > 8:
        raise TooManyClusters(f"{k} clusters exceeds the permutation-search limit of 8")
    C = np.zeros((k, k))
    np.add.at(C, (ia, ib), 1)
    best = max(sum(C[i, pi[i]] for i in range(k)) for pi in itertools.permutations(range(k)))
    return float(best) / len(a)


@dataclass
class ClusterResult:
    labels: np.ndarray
    spectrum: SpectralDecomposition
    embedding: np.ndarray
    assignment: ClusterAssignment
    provenance: dict
    timings: dict


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        except StageError:
            raise
        except FermatError as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = time.perf_counter() - t0


def _finish(st, G, spec, r, k, seed, method, row_normalize, prov):
    dec = st.run("eigen", eig_smallest, spec, G, r, method=method, require_connected=False)
    emb = dec.eigenvectors
    if row_normalize:
        emb = emb / np.maximum(np.linalg.norm(emb, axis=1, keepdims=True), 1e-300)
    asg = st.run("kmeans", kmeans, emb, k, seed)
    prov.update({"k": k, "r": r, "seed": seed, "edges": int((G.weights.nnz - G.n) // 2)})
    return ClusterResult(asg.labels, dec, emb, asg, prov, st.timings)


def fermat_graph(cloud: PointCloud, p: float, h: float, mode: str = "exact", knn_k: Optional[int] = None,
                 raw_lp: bool = False, mu: float = 1.0, st: Optional[_Stages] = None):
    """Kernel graph on Fermat distances.

    Default: eta(l~_p^p / (mu h)) with l~ the n^((p-1)/m)-normalized distance.
    raw_lp: eta(l_p / h) with the unnormalized p-th root (algorithm-literal form).
    """
    st = st or _Stages()
    n, m = cloud.n, cloud.intrinsic_dim
    params = FermatParams(p, m, mode, knn_k)
    if raw_lp:
        dm = st.run("distances", fermat_pairwise, cloud, params, cutoff=h ** p)
        vals = dm.values.copy()
        vals.data = vals.data ** (1.0 / p)
        return st.run("weights", build_weights, vals, h, n, m)
    raw_cut = h * mu / fermat_scale(n, p, m)
    dm = st.run("distances", fermat_pairwise, cloud, params, cutoff=raw_cut)
    dm = normalize_fermat(dm, n, params)
    return st.run("weights", build_weights, dm, h, n, m, mu=mu)


def spectral_cluster_fd(cloud: PointCloud, p: float, s: float, h: float, r: int, k: int, seed: int,
                        mode: str = "exact", knn_k: Optional[int] = None, raw_lp: bool = False,
                        mu: float = 1.0, method: str = "auto", row_normalize: bool = False) -> ClusterResult:
    """Fermat-distance spectral clustering: weights -> L_{p,s} -> bottom r eigenvectors -> k-means."""
    st = _Stages()
    G = fermat_graph(cloud, p, h, mode, knn_k, raw_lp, mu, st)
    spec = LaplacianSpec("fermat_ps", h, cloud.intrinsic_dim, cloud.n, p=p, s=s, scaled=True)
    prov = {"pipeline": "fd", "p": p, "s": s, "h": h, "epsilon": h, "mode": mode, "mu": mu,
            "kernel": "eta(l_p/h)" if raw_lp else "eta(l~_p^p/(mu h))", "n": cloud.n, "m": cloud.intrinsic_dim}
    return _finish(st, G, spec, r, k, seed, method, row_normalize, prov)


def euclidean_graph(cloud, h: float, m: Optional[int] = None):
    X = _points(cloud)
    n = len(X)
    m = (cloud.intrinsic_dim if isinstance(cloud, PointCloud) else X.shape[1]) if m is None else m
    i, j, lens = _radius_edges(X, h)
    keep = lens <= h
    i, j, lens = i[keep], j[keep], lens[keep]
    D = sp.csr_matrix((np.r_[lens, lens], (np.r_[i, j], np.r_[j, i])), shape=(n, n))
    return build_weights(D, h, n, m)


def spectral_cluster_dn(cloud: PointCloud, q: float, j: float, h: float, r: int, k: int, seed: int,
                        method: str = "auto", row_normalize: bool = False) -> ClusterResult:
    """Degree-normalized spectral clustering on Euclidean kernel weights."""
    st = _Stages()
    G = st.run("weights", euclidean_graph, cloud, h)
    spec = LaplacianSpec("dn", h, cloud.intrinsic_dim, cloud.n, j=j, q=q, scaled=True)
    prov = {"pipeline": "dn", "q": q, "j": j, "h": h, "n": cloud.n, "m": cloud.intrinsic_dim}
    return _finish(st, G, spec, r, k, seed, method, row_normalize, prov)
