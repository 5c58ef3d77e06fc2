"""Monte-Carlo time constant of power-weighted first-passage percolation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .errors import ConfigError
from .fermat import _radius_edges, default_k, knn_graph
from .rng import stream

# Frozen estimates (mean, stderr) for m = 2: estimate_mu(p, 2, r=1, intensity=2000,
# replicates=200, seed=20240601). Regenerate with `fermatlap estimate-mu`.
MU_TABLE = {
    (1.2, 2): (1.080259237015788, 0.0007863599129339502),
    (1.5, 2): (1.1048874656508783, 0.0017304132664715994),
    (2.0, 2): (1.096688220438009, 0.0029911018522264963),
    (2.5, 2): (1.0774774071778592, 0.004086262015229386),
    (3.0, 2): (1.062792005017153, 0.005267382693443999),
    (4.0, 2): (1.0587700601805154, 0.007782627768504726),
}


@dataclass
class MuEstimate:
    mean: float
    stderr: float
    replicates: int
    r: float
    intensity: float
    p: float
    m: int
    values: np.ndarray = field(repr=False, default=None)
    empty_resamples: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("replicate,value\n")
            for i, v in enumerate(self.values):
                f.write(f"{i},{v:.17g}\n")
            f.write(f"# mean={self.mean:.17g} stderr={self.stderr:.17g} replicates={self.replicates} "
                    f"r={self.r!r} intensity={self.intensity!r} p={self.p!r} m={self.m}\n")


def _passage(X: np.ndarray, p: float) -> float:
    """l_p^p between X[0] and X[1] on the complete graph over X, exactly."""
    if p == 1.0 or len(X) < 4:
        return float(K.sssp_complete(X, p, 0, np.inf, 1)[1])
    # upper bound from a k-NN graph, then the radius graph holding every hop of cost <= bound
    U = float(np.sum((X[1] - X[0]) ** 2) ** (p / 2))
    g = knn_graph(X, min(default_k(len(X)), len(X) - 1)).off_diagonal()
    _, comp = connected_components(g, directed=False)
    if comp[0] == comp[1]:
        g.data = g.data ** p
        U = min(U, float(K.sssp_one(g.indptr, g.indices.astype(np.int64), g.data, 0, np.inf, 1)[1]))
    R = U ** (1.0 / p)
    span = np.ptp(X, axis=0)
    if np.prod(np.minimum(2 * R, span)) > 0.25 * np.prod(span):
        # radius graph would be nearly complete: the O(n^2) scan is cheaper
        return float(K.sssp_complete(X, p, 0, U * (1 + 1e-12), 1)[1])
    i, j, lens = _radius_edges(X, R)
    w = lens ** p
    n = len(X)
    G = sp.csr_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n))
    G.sort_indices()
    return float(K.sssp_one(G.indptr, G.indices.astype(np.int64), G.data, 0, U * (1 + 1e-12), 1)[1])


def replicate_value(p: float, m: int, r: float, intensity: float, seed: int, index: int,
                    padding: float = 0.5):
    """One replicate: (value, number of empty draws discarded)."""
    rng = stream(seed, index)
    lo = np.r_[-padding * r, np.full(m - 1, -padding * r)]
    hi = np.r_[r + padding * r, np.full(m - 1, padding * r)]
    vol = float(np.prod(hi - lo))
    empty = 0
    while True:
        N = int(rng.poisson(intensity * vol))
        if N > 0:
            break
        empty += 1
    pts = lo + (hi - lo) * rng.random((N, m))
    ends = np.zeros((2, m))
    ends[1, 0] = r
    X = np.ascontiguousarray(np.vstack([ends, pts]))
    ell = _passage(X, p)
    return intensity ** ((p - 1.0) / m) * ell / r, empty


def estimate_mu(p: float, m: int, r: float = 1.0, intensity: float = 2000.0, replicates: int = 200,
                seed: int = 0, padding: float = 0.5) -> MuEstimate:
    """Mean and standard error of intensity^((p-1)/m) l_p^p(0, r e1) / r over Poisson replicates."""
    if p < 1 or m < 1 or r <= 0 or replicates < 2:
        raise ConfigError("need p >= 1, m >= 1, r > 0, replicates >= 2")
    vol = (1 + 2 * padding) * r * (2 * padding * r) ** (m - 1)
    if intensity * vol < 100:
        raise ConfigError(f"expected {intensity * vol:.1f} points per replicate; need >= 100")
    vals = np.empty(replicates)
    empty = 0
    for i in range(replicates):
        vals[i], e = replicate_value(p, m, r, intensity, seed, i, padding)
        empty += e
    sd = float(np.std(vals, ddof=1))
    return MuEstimate(float(vals.mean()), sd / math.sqrt(replicates), replicates, r, intensity, p, m,
                      vals, empty)


def reference_mu(p: float, m: int) -> float:
    """Time constant used to rescale normalized Fermat distances.

    m = 1 is exact: the optimal path visits every intermediate point, gaps are
    exponential, so the constant is Gamma(p + 1). m = 2 reads the frozen table.
    """
    if p == 1.0:
        return 1.0
    if m == 1:
        return math.gamma(p + 1.0)
    key = (float(p), int(m))
    if key not in MU_TABLE:
        raise ConfigError(f"no frozen time constant for p={p}, m={m}; available: {sorted(MU_TABLE)}")
    return MU_TABLE[key][0]
