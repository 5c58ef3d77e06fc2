"""Kernel weights, degrees, Laplacian normalizations, Dirichlet form and Ncut.

Every Laplacian here has the form  L = scale * S1 A S2  with A symmetric
(a reweighted D - W) and S1, S2 positive diagonals. `laplacian_factors`
returns that factorization; the spectral module uses it to solve through a
symmetric conjugate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ._graph import SparseWeightedGraph
from .errors import ConfigError, EmptyGraph, EmptySide, EpsOutOfRange, NegativeArgument, ZeroDegree
from .fermat import DistanceMatrix

__all__ = [
    "SparseWeightedGraph", "LaplacianSpec", "unit_ball_volume", "kernel_eta", "build_weights",
    "degrees", "laplacian_jqr", "laplacian_dn", "laplacian_ps", "rw_laplacian", "dirichlet_form",
    "ncut", "bandwidth_rule", "laplacian_factors", "laplacian_matrix", "remark_mapping",
]


def unit_ball_volume(m: int) -> float:
    if m < 1:
        raise ConfigError("m must be >= 1")
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def kernel_eta(t, m: int):
    """Normalized indicator kernel, closed at t = 1."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise NegativeArgument("kernel argument must be >= 0")
    v = np.where(t <= 1.0, 1.0 / unit_ball_volume(m), 0.0)
    return float(v) if v.ndim == 0 else v


def build_weights(dm, h: float, n: Optional[int] = None, m: Optional[int] = None,
                  mu: float = 1.0) -> SparseWeightedGraph:
    """w_ij = eta(d_ij / h) / (n h^m) with d_ij = dm / mu; self-loops included.

    `dm` is a DistanceMatrix or any dense/sparse matrix of distances (a sparse
    matrix stores only off-diagonal pairs, missing pairs lie beyond h).
    """
    if not h > 0:
        raise ConfigError("h must be positive")
    if isinstance(dm, DistanceMatrix):
        vals = dm.values
        m = dm.m if m is None else m
        if dm.is_sparse and (dm.cutoff is None or dm.cutoff < h * mu * (1 - 1e-12)):
            raise ConfigError("sparse distances must be computed with cutoff >= h * mu")
    else:
        vals = dm
    if m is None:
        raise ConfigError("intrinsic dimension m required")
    N = vals.shape[0]
    n = N if n is None else n
    w = 1.0 / (n * h ** m * unit_ball_volume(m))
    thr = h * mu
    if sp.issparse(vals):
        U = sp.triu(vals, k=1).tocoo()
        keep = U.data <= thr
        i, j = U.row[keep], U.col[keep]
    else:
        vals = np.asarray(vals)
        i, j = np.nonzero(np.triu(vals <= thr, k=1))
    if len(i) == 0:
        raise EmptyGraph("no off-diagonal weight: bandwidth too small")
    return SparseWeightedGraph.from_upper(N, i, j, np.full(len(i), w), diag=w,
                                          meta={"h": h, "m": m, "n": n, "mu": mu})


def degrees(G: SparseWeightedGraph) -> np.ndarray:
    """Row sums, self-loops included."""
    return np.asarray(G.weights.sum(axis=1)).ravel()


def _positive(d):
    if np.any(d <= 0):
        raise ZeroDegree(f"{int(np.sum(d <= 0))} node(s) with zero degree")
    return d


def _reweight(G: SparseWeightedGraph, g: np.ndarray):
    """(g_i g_j w_ij) and its degrees; product g_i*g_j formed first so symmetry stays exact."""
    C = G.weights.tocoo()
    data = C.data * (g[C.row] * g[C.col])
    Wg = sp.csr_matrix((data, (C.row, C.col)), shape=C.shape)
    return Wg, np.asarray(Wg.sum(axis=1)).ravel()


@dataclass(frozen=True)
class LaplacianSpec:
    """Which normalization to build.

    mode: 'jqr' (literal L_{j,q,r} reweighting W/(D_i^q D_j^q)), 'dn' (degree
    normalized, reweighting W/(d_i^(1-q/2) d_j^(1-q/2))), 'fermat_ps' and 'rw'.
    `scaled` multiplies by 2(m+2)/h^2 ('rw' is always scaled).
    """

    mode: str
    h: float
    m: int
    n: Optional[int] = None
    j: float = 2.0
    q: float = 2.0
    r: float = 0.0
    p: float = 1.0
    s: float = 2.0
    scaled: bool = False

    def __post_init__(self):
        if self.mode not in ("jqr", "dn", "fermat_ps", "rw"):
            raise ConfigError(f"unknown Laplacian mode {self.mode!r}")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.mode == "fermat_ps" and (self.p < 1 or self.s < 0):
            raise ConfigError("fermat_ps needs p >= 1 and s >= 0")

    @property
    def scale(self) -> float:
        if self.mode == "rw" or self.scaled:
            return 2.0 * (self.m + 2) / self.h ** 2
        return 1.0


def remark_mapping(p: float, s: float, m: int):
    """(j, q, r) of the Euclidean normalization sharing the Fermat (p, s) limit."""
    alpha = 2.0 * (p - 1.0) / m
    j = (s - 1.0) * p + 1.0
    return j, j + alpha, 0.0


def _dn_exponent(j, q):
    if q == 1.0:
        if j == 1.0:
            return -1.0  # limit of (1-j)/(q-1) along j = q
        raise ConfigError("q = 1 requires j = 1 in the degree-normalized family")
    return (1.0 - j) / (q - 1.0)


def laplacian_factors(spec: LaplacianSpec, G: SparseWeightedGraph):
    """(A, s1, s2, scale) with L = scale * diag(s1) A diag(s2), A symmetric."""
    d = _positive(degrees(G))
    one = np.ones(G.n)
    mode = spec.mode
    if mode == "rw":
        A = sp.diags(d) - G.weights
        return A.tocsr(), 1.0 / d, one, spec.scale
    if mode == "jqr":
        if spec.q == 1.0:
            return (sp.diags(d) - G.weights).tocsr(), one, one, spec.scale
        Wq, dq = _reweight(G, d ** (-spec.q))
        dq = _positive(dq)
        A = (sp.diags(dq) - Wq).tocsr()
        return A, dq ** ((1.0 - spec.j) / (spec.q - 1.0)), dq ** (-spec.r / (spec.q - 1.0)), spec.scale
    if mode == "dn":
        e = _dn_exponent(spec.j, spec.q)
        Wq, dq = _reweight(G, d ** (spec.q / 2.0 - 1.0))
        dq = _positive(dq)
        A = (sp.diags(dq) - Wq).tocsr()
        s2 = one if spec.r == 0 else dq ** (-spec.r / (spec.q - 1.0))
        return A, dq ** e, s2, spec.scale
    Ws, ds = _reweight(G, d ** (spec.s / 2.0 - 1.0))
    ds = _positive(ds)
    return (sp.diags(ds) - Ws).tocsr(), 1.0 / ds, one, spec.scale


def laplacian_matrix(spec: LaplacianSpec, G: SparseWeightedGraph) -> sp.csr_matrix:
    A, s1, s2, c = laplacian_factors(spec, G)
    return (c * (sp.diags(s1) @ A @ sp.diags(s2))).tocsr()


def laplacian_jqr(G: SparseWeightedGraph, j: float, q: float, r: float) -> sp.csr_matrix:
    """D_q^((1-j)/(q-1)) (D_q - W_q) D_q^(-r/(q-1)), (W_q)_ij = W_ij/(D_i^q D_j^q); q = 1 gives D - W."""
    return laplacian_matrix(LaplacianSpec("jqr", 1.0, 1, j=j, q=q, r=r), G)


def laplacian_dn(G: SparseWeightedGraph, q: float, j: float, r: float = 0.0) -> sp.csr_matrix:
    """D_q^((1-j)/(q-1)) (D_q - W_q) with W_q = W/(d_i^(1-q/2) d_k^(1-q/2))."""
    return laplacian_matrix(LaplacianSpec("dn", 1.0, 1, j=j, q=q, r=r), G)


def laplacian_ps(G: SparseWeightedGraph, s: float) -> sp.csr_matrix:
    """D_ps^-1 (D_ps - W_ps) with W_ps = W/(d_i^(1-s/2) d_j^(1-s/2))."""
    return laplacian_matrix(LaplacianSpec("fermat_ps", 1.0, 1, s=s), G)


def rw_laplacian(G: SparseWeightedGraph, h: float, m: int) -> sp.csr_matrix:
    """(2(m+2)/h^2)(I - D^-1 W)."""
    return laplacian_matrix(LaplacianSpec("rw", h, m), G)


def dirichlet_form(G: SparseWeightedGraph, h: float, m: int, n: int, u, v):
    """((m+2)/(n h^2)) sum_ij w_ij (u_i - u_j)(v_i - v_j).

    u and v may be vectors or n x a / n x b matrices (then an a x b matrix is returned).
    """
    C = G.weights.tocoo()
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = u[C.row] - u[C.col]
    dv = v[C.row] - v[C.col]
    c = (m + 2) / (n * h ** 2)
    if du.ndim == 1 and dv.ndim == 1:
        return c * float(np.sum(C.data * du * dv))
    du = du.reshape(len(C.data), -1)
    dv = dv.reshape(len(C.data), -1)
    return c * ((du * C.data[:, None]).T @ dv)


def ncut(G: SparseWeightedGraph, labels) -> float:
    """cut(Z, Z^c) / min(vol Z, vol Z^c); self-loops count in neither term."""
    z = np.asarray(labels).astype(bool)
    if z.all() or not z.any():
        raise EmptySide("both sides of the partition must be nonempty")
    W = G.off_diagonal()
    deg = np.asarray(W.sum(axis=1)).ravel()
    C = W.tocoo()
    cut = float(np.sum(C.data[z[C.row] & ~z[C.col]]))
    vol = min(float(deg[z].sum()), float(deg[~z].sum()))
    if vol == 0:
        return 0.0 if cut == 0 else math.inf
    return cut / vol


def bandwidth_rule(n: int, m: int, eps: float, p: float, beta: float, mu: float,
                   prefactor: float = 4.0) -> float:
    """prefactor * mu * beta^((p-1)/m) * (n beta/2)^(-(1/m)(1/3 - eps)); prefactor 4 is the admissible lower bound."""
    if not 0 < eps < 1.0 / (8 * p + 6):
        raise EpsOutOfRange(f"eps={eps} outside (0, {1.0 / (8 * p + 6):.6g})")
    return prefactor * mu * beta ** ((p - 1) / m) * (n * beta / 2) ** (-(1.0 / m) * (1.0 / 3 - eps))
