"""Eigen-decompositions, min-max cross-check, continuum reference spectra,
spectral projections, the eigenvector perturbation bound and diffusion."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components, reverse_cuthill_mckee

from ._graph import SparseWeightedGraph
from ._tridiag import eigh_ql
from .errors import (ConfigError, DisconnectedGraph, GridTooCoarse, HypothesisViolated,
                     NotConverged, UnstableStep)
from .graph_laplacian import LaplacianSpec, degrees, dirichlet_form, laplacian_factors
from .rng import stream
from .sampling import DensityModel

QL_MAX = 400
DENSE_MAX = 2000
CLUSTER_GAP = 1e-9


@dataclass
class SpectralDecomposition:
    """Smallest eigenpairs, eigenvectors orthonormal in <u, v>_m = (1/n) sum mass_i u_i v_i."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mass: np.ndarray
    residuals: np.ndarray
    clusters: list = field(default_factory=list)
    method: str = ""

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    def inner(self, u, v):
        return (self.mass * u) @ v / self.n

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("k,lambda,residual\n")
            for k, (lam, r) in enumerate(zip(self.eigenvalues, self.residuals)):
                f.write(f"{k + 1},{lam:.17g},{r:.17g}\n")


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    sgn = np.sign(V[idx, np.arange(V.shape[1])])
    sgn[sgn == 0] = 1.0
    return V * sgn


def _clusters(lam):
    out, cur = [], [0]
    for k in range(1, len(lam)):
        if lam[k] - lam[k - 1] < CLUSTER_GAP * max(1.0, abs(lam[k])):
            cur.append(k)
        else:
            if len(cur) > 1:
                out.append(cur)
            cur = [k]
    if len(cur) > 1:
        out.append(cur)
    return out


def _symmetric_smallest(A, t, K, method):
    n = A.shape[0]
    if method == "auto":
        method = "ql" if n <= QL_MAX else ("lapack" if n <= DENSE_MAX or 4 * K > n else "sparse")
    if method in ("ql", "lapack"):
        M = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        M = M * t[:, None] * t[None, :]
        M = 0.5 * (M + M.T)
        if method == "ql":
            w, V, sweeps = eigh_ql(M)
            if sweeps < 0:
                raise NotConverged(np.finfo(float).eps, 64 * n)
            return w[:K], V[:, :K], method
        w, V = sla.eigh(M, subset_by_index=[0, K - 1], driver="evr")
        return w, V, method
    if method != "sparse":
        raise ConfigError(f"unknown eigensolver method {method!r}")
    T = sp.diags(t)
    M = (T @ A @ T).tocsr()
    M = 0.5 * (M + M.T)
    # bandwidth-reducing order keeps the shift-invert factorization sparse
    perm = reverse_cuthill_mckee(M.tocsr(), symmetric_mode=True)
    M = M[perm][:, perm].tocsc()
    shift = -1e-3 * max(float(abs(M).sum(axis=1).max()), 1e-300)
    try:
        w, V = spla.eigsh(M, k=K, sigma=shift, which="LM", v0=np.ones(n), tol=1e-13, maxiter=64 * n)
    except spla.ArpackNoConvergence as exc:
        raise NotConverged(1e-13, 64 * n) from exc
    order = np.argsort(w)
    U = np.empty_like(V)
    U[perm] = V
    return w[order], U[:, order], method


def eig_smallest(spec: LaplacianSpec, G: SparseWeightedGraph, K: int, method: str = "auto",
                 require_connected: bool = True) -> SpectralDecomposition:
    """K smallest eigenpairs of the Laplacian described by `spec`.

    With L = c S1 A S2 the eigenvalues are those of the symmetric matrix
    T^(1/2) A T^(1/2), T = S1 S2; eigenvectors map back as
    v = S2^-1 T^(1/2) w and are orthonormal for the mass S2/S1.
    """
    n = G.n
    if not 1 <= K <= n:
        raise ConfigError(f"need 1 <= K <= n, got K={K}")
    if require_connected:
        ncomp, _ = connected_components(G.off_diagonal(), directed=False)
        if ncomp > 1:
            raise DisconnectedGraph(f"graph has {ncomp} components")
    A, s1, s2, c = laplacian_factors(spec, G)
    t = np.sqrt(s1 * s2)
    w, W, used = _symmetric_smallest(A, t, K, method)
    V = W * (t / s2)[:, None]
    mass = s2 / s1
    V = V / np.sqrt((mass[:, None] * V * V).sum(axis=0) / n)
    V = _fix_signs(V)
    lam = c * w
    # residual of A (S2 v) = (lam/c) S1^-1 v, relative to |S1^-1 v|
    AV = A @ (V * s2[:, None])
    BV = V / s1[:, None]
    res = np.linalg.norm(AV - BV * w[None, :], axis=0) / np.linalg.norm(BV, axis=0)
    return SpectralDecomposition(lam, V, mass, res, _clusters(lam), used)


def rayleigh_minmax_check(G: SparseWeightedGraph, h: float, m: int, K: Optional[int] = None):
    """Compare the pencil (Dirichlet form, mass) eigenvalues with eig_smallest of the scaled random walk.

    Returns (form eigenvalues, solver eigenvalues, per-k relative gaps, max gap).
    """
    n = G.n
    if n > 64:
        raise ConfigError("rayleigh_minmax_check is an oracle for n <= 64")
    K = n if K is None else K
    I = np.eye(n)
    B = dirichlet_form(G, h, m, n, I, I)
    Mm = np.diag(degrees(G)) / n
    lam_form = sla.eigh(0.5 * (B + B.T), Mm, eigvals_only=True)[:K]
    dec = eig_smallest(LaplacianSpec("rw", h, m), G, K, method="ql", require_connected=False)
    lam = dec.eigenvalues
    # near-zero eigenvalues are compared on the scale of the whole spectrum
    floor = 1e-3 * max(np.max(np.abs(lam)), np.max(np.abs(lam_form)), 1e-300)
    gaps = np.abs(lam_form - lam) / np.maximum(np.maximum(np.abs(lam), np.abs(lam_form)), floor)
    return lam_form, lam, gaps, float(gaps.max())


def continuum_spectrum_1d(model: DensityModel, p: float, s: float, gridN: int, K: int) -> np.ndarray:
    """Smallest K eigenvalues of -rho^alpha [f'' + (p(s-1)+1+alpha)(rho'/rho) f'] on R/Z, alpha = 2(p-1).

    Discretized in flux form -(1/w)(kappa f')' with w = rho^(p(s-1)+1),
    kappa = w rho^alpha sampled at cell midpoints; the scheme is self-adjoint
    for the discrete w-weighted inner product, so the symmetric conjugate
    W^(1/2) L W^(-1/2) is diagonalized.
    """
    if model.domain.kind != "circle":
        raise ConfigError("continuum_spectrum_1d needs a circle density")
    if gridN < 64:
        raise GridTooCoarse(f"gridN={gridN} < 64")
    alpha = 2.0 * (p - 1.0)
    e_w = p * (s - 1.0) + 1.0
    dx = 1.0 / gridN
    x = np.arange(gridN) * dx
    w = model(x) ** e_w
    kap = model(x + 0.5 * dx) ** (e_w + alpha)
    rw = np.sqrt(w)
    diag = (kap + np.roll(kap, 1)) / (w * dx * dx)
    off = -kap / (rw * np.roll(rw, -1) * dx * dx)
    S = np.diag(diag)
    i = np.arange(gridN)
    S[i, (i + 1) % gridN] += off
    S[(i + 1) % gridN, i] += off
    return sla.eigvalsh(S, subset_by_index=[0, K - 1])


def spectral_projection(dec: SpectralDecomposition, J, u) -> np.ndarray:
    """Mass-orthogonal projection of u onto span{v_k : lo < lambda_k <= hi}."""
    lo, hi = J
    u = np.asarray(u, dtype=float)
    sel = (dec.eigenvalues > lo) & (dec.eigenvalues <= hi)
    V = dec.eigenvectors[:, sel]
    coef = (V * dec.mass[:, None]).T @ u / dec.n
    return V @ coef


def _form_matrix(dec):
    """Matrix of b in coordinates where the mass inner product is Euclidean."""
    r = np.sqrt(dec.mass / dec.n)
    Vt = dec.eigenvectors * r[:, None]
    return (Vt * dec.eigenvalues) @ Vt.T, r


def eigvec_discrepancy_check(dec1: SpectralDecomposition, dec2: SpectralDecomposition, k: int,
                             delta: float, alpha: float, beta: float, gamma: float,
                             a: Optional[float] = None, audit_samples: int = 1000, seed: int = 0) -> dict:
    """Check the projection bound for eigenvector k (0-based) of b1 against the spectrum of b2.

    Hypothesis audit (relative form): (1 - delta) b1 <= b2 <= (1 + delta) b1,
    checked exactly on full decompositions and on `audit_samples` random unit
    vectors. Raises HypothesisViolated with a witness vector when the audit or
    the gap condition (no lambda2 in (lambda1_k + alpha, lambda1_k + beta)) fails.
    """
    if not 0 <= alpha <= beta <= gamma <= 1:
        raise ConfigError("need 0 <= alpha <= beta <= gamma <= 1")
    a = alpha if a is None else a
    n = dec1.n
    if dec2.n != n or not np.allclose(dec1.mass, dec2.mass, rtol=1e-12, atol=0):
        raise ConfigError("both forms must live on the same inner-product space")
    if dec1.eigenvectors.shape[1] != n or dec2.eigenvectors.shape[1] != n:
        raise ConfigError("full decompositions are required")
    B1, r = _form_matrix(dec1)
    B2, _ = _form_matrix(dec2)
    D = B2 - B1
    lam1 = dec1.eigenvalues
    tol = 1e-12 * max(1.0, float(np.max(np.abs(lam1))))
    # exact audit: kernel of b1 must be annihilated by b2; relative bound on its range
    Vt1 = dec1.eigenvectors * r[:, None]
    ker = np.abs(lam1) <= tol
    if ker.any():
        Z = Vt1[:, ker]
        leak = float(np.linalg.norm(B2 @ Z, 2))
        if leak > tol:
            raise HypothesisViolated(f"b2 nonzero on ker b1 ({leak:.3g})", witness=Z[:, 0] / r)
    R = Vt1[:, ~ker] / np.sqrt(lam1[~ker])[None, :]
    rel = R.T @ D @ R
    ev, evec = np.linalg.eigh(0.5 * (rel + rel.T))
    sup_exact = float(np.max(np.abs(ev))) if len(ev) else 0.0
    if sup_exact > delta * (1 + 1e-9) + 1e-12:
        y = R @ evec[:, np.argmax(np.abs(ev))]
        raise HypothesisViolated(f"sup |b2 - b1| / b1 = {sup_exact:.6g} > delta", witness=y / r)
    rng = stream(seed, 0)
    Y = rng.normal(size=(n, audit_samples))
    Y /= np.linalg.norm(Y, axis=0)
    b1 = np.einsum("ij,ij->j", Y, B1 @ Y)
    b2 = np.einsum("ij,ij->j", Y, B2 @ Y)
    viol = np.abs(b2 - b1) - delta * b1
    worst = int(np.argmax(viol))
    if viol[worst] > 1e-12 * max(1.0, float(np.max(np.abs(b1)))):
        raise HypothesisViolated("sampled vector violates the delta bound", witness=Y[:, worst] / r)
    lk = float(lam1[k])
    lam2 = dec2.eigenvalues
    inside = (lam2 > lk + alpha) & (lam2 < lk + beta)
    if inside.any():
        raise HypothesisViolated("gap condition fails", witness=dec2.eigenvectors[:, np.argmax(inside)])
    u = dec1.eigenvectors[:, k]

    def dist2(v):
        return float(dec1.inner(v, v))

    same = np.array_equal(dec1.eigenvalues, dec2.eigenvalues) and np.array_equal(dec1.eigenvectors,
                                                                                dec2.eigenvectors)
    # identical forms: u is itself an eigenvector of b2 inside the window, so the distance is exactly 0
    lhs = 0.0 if same else dist2(u - spectral_projection(dec2, (lk - gamma, lk + alpha), u))
    rhs = delta * lk / beta + alpha / gamma + delta * lk * (lk + beta) / (gamma * beta)
    out = {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + 1e-12), "audit_sup": sup_exact,
           "lambda": lk}
    if a > 0:
        w = u - spectral_projection(dec2, (-np.inf, lk + a), u)
        c = (dec2.mass * w) @ dec2.eigenvectors / n
        out["lemma_norm"] = dist2(w)
        out["lemma_norm_bound"] = delta * lk / a
        out["lemma_energy"] = float(np.sum(dec2.eigenvalues * c * c))
        out["lemma_energy_bound"] = delta * lk * (lk + a) / a
    return out


def diffusion_evolve(L, u0, T: float, dt: float) -> np.ndarray:
    """Explicit Euler for du/dt = u Q with Q = -L (u a row vector)."""
    Ld = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
    u = np.asarray(u0, dtype=float).copy()
    diag = np.abs(np.diag(Ld))
    scale = max(float(diag.max()), 1e-300)
    rows = np.abs(Ld.sum(axis=1))
    if rows.max() > 1e-8 * max(scale, 1.0):
        raise ConfigError("Laplacian rows must sum to zero")
    if dt > 1.0 / scale * (1 + 1e-12):
        raise UnstableStep(f"dt={dt:g} exceeds 1/max|diag| = {1.0 / scale:.6g}")
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / nsteps
    Q_T = -Ld.T
    for _ in range(nsteps):
        u = u + h * (Q_T @ u)
    return u
