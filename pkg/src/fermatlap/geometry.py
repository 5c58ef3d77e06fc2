"""Continuum Fermat geometry on flat domains.

The conformal metric is g_p = rho^(-alpha) g with alpha = 2(p - 1)/m. Its
geodesics solve

    x'' = (alpha/rho) <x', grad rho> x' - (alpha/(2 rho)) |x'|^2 grad rho,

and a curve has g_p length  int rho^((1-p)/m) |x'| dt,  which is L_p^p.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels as K
from .errors import ConfigError, GridTooCoarse, LeftDomain, OutOfDomain
from .sampling import DensityModel


def conformal_alpha(p: float, m: int) -> float:
    return 2.0 * (p - 1.0) / m


@dataclass
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray
    t: float = 0.0


@dataclass
class LocalDensityJet:
    """Value, gradient and Hessian of rho at one point."""

    rho0: float
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=float).reshape(-1)
        self.hess = np.asarray(self.hess, dtype=float).reshape(len(self.grad), len(self.grad))
        if not self.rho0 > 0:
            raise ConfigError("rho0 must be positive")
        if np.max(np.abs(self.hess - self.hess.T), initial=0.0) > 1e-12:
            raise ConfigError("Hessian must be symmetric")

    @staticmethod
    def from_model(model: DensityModel, x) -> "LocalDensityJet":
        return LocalDensityJet(float(model(x)), model.gradient(x), model.hessian(x))


def _accel(model, X, V, alpha):
    rho = model._raw(X) / model.normalization
    g = model._raw_grad(X) / model.normalization
    gv = np.einsum("ij,ij->i", g, V)
    vv = np.einsum("ij,ij->i", V, V)
    return (alpha / rho)[:, None] * (gv[:, None] * V - 0.5 * vv[:, None] * g)


def _inside(model, X):
    return model.domain.contains(X)


def _rk4(model, X, V, alpha, dt):
    """One RK4 step for a batch of states. Returns (X, V, ok) with ok False where a stage left the domain."""
    ok = _inside(model, X)

    def f(Y, W):
        nonlocal ok
        inside = _inside(model, Y)
        ok = ok & inside
        Yc = np.where(inside[:, None], Y, X)
        return W, _accel(model, Yc, W, alpha)

    k1x, k1v = f(X, V)
    k2x, k2v = f(X + 0.5 * dt * k1x, V + 0.5 * dt * k1v)
    k3x, k3v = f(X + 0.5 * dt * k2x, V + 0.5 * dt * k2v)
    k4x, k4v = f(X + dt * k3x, V + dt * k3v)
    Xn = X + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    Vn = V + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    ok = ok & _inside(model, Xn)
    return Xn, Vn, ok


def geodesic_ode_step(model: DensityModel, state: GeodesicState, p: float, dt: float,
                      m: Optional[int] = None) -> GeodesicState:
    """One fixed RK4 step of the geodesic equation."""
    m = model.dim if m is None else m
    X = np.asarray(state.position, dtype=float).reshape(1, -1)
    V = np.asarray(state.velocity, dtype=float).reshape(1, -1)
    if not _inside(model, X)[0]:
        raise OutOfDomain("state outside the domain")
    Xn, Vn, ok = _rk4(model, X, V, conformal_alpha(p, m), dt)
    if not ok[0]:
        raise LeftDomain(f"step from {X[0]} left the domain")
    return GeodesicState(Xn[0], Vn[0], state.t + dt)


def gp_speed(model: DensityModel, x, v, p: float, m: Optional[int] = None):
    m = model.dim if m is None else m
    X = np.atleast_2d(x)
    V = np.atleast_2d(v)
    rho = model(X)
    return np.asarray(rho) ** (-conformal_alpha(p, m) / 2) * np.linalg.norm(V, axis=1)


def _kink(model, X):
    if model.kind != "gaussian_mixture_bg":
        return np.zeros(len(X), dtype=bool)
    return model._bumps(X) > model.params["tau"]


@dataclass
class GeodesicTrace:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    left_domain: bool
    crossed_kink: bool

    def to_csv(self, path) -> None:
        m = self.positions.shape[1]
        with open(path, "w") as f:
            f.write("t," + ",".join(f"x{i + 1}" for i in range(m)) + "\n")
            for t, x in zip(self.times, self.positions):
                f.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in x) + "\n")


def _shoot(model, x0, dirs, p, T, dt, m):
    """Integrate unit-speed geodesics from x0 in each row of `dirs` up to time T."""
    alpha = conformal_alpha(p, m)
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    rho0 = float(model(x0[0]))
    nsteps = max(1, int(np.ceil(T / dt - 1e-9)))
    h = T / nsteps
    X = np.repeat(x0, len(dirs), axis=0)
    V = rho0 ** (alpha / 2) * np.asarray(dirs, dtype=float)
    alive = np.ones(len(dirs), dtype=bool)
    side0 = _kink(model, X)
    crossed = np.zeros(len(dirs), dtype=bool)
    path = [X.copy()]
    vel = [V.copy()]
    for _ in range(nsteps):
        Xn, Vn, ok = _rk4(model, X, V, alpha, h)
        upd = alive & ok
        X = np.where(upd[:, None], Xn, X)
        V = np.where(upd[:, None], Vn, V)
        alive = upd
        crossed |= _kink(model, X) != side0
        path.append(X.copy())
        vel.append(V.copy())
    times = h * np.arange(nsteps + 1)
    return times, np.stack(path, 1), np.stack(vel, 1), ~alive, crossed


def integrate_geodesic(model: DensityModel, x0, b, p: float, T: float, dt: float,
                       m: Optional[int] = None) -> GeodesicTrace:
    """Unit-speed geodesic from x0 with initial Euclidean direction b (normalized here).

    If the curve leaves the domain the trace stops at the last interior point
    and `left_domain` is set. `crossed_kink` flags crossing a non-smooth level
    set of the density (mixture background cutoff).
    """
    m = model.dim if m is None else m
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b)
    times, P, V, left, crossed = _shoot(model, x0, b[None, :], p, T, dt, m)
    P, V = P[0], V[0]
    if left[0]:
        keep = np.r_[True, np.any(np.diff(P, axis=0) != 0, axis=1)]
        last = np.nonzero(keep)[0].max()
        times, P, V = times[: last + 1], P[: last + 1], V[: last + 1]
    return GeodesicTrace(times, P, V, bool(left[0]), bool(crossed[0]))


def geodesic_taylor(jet: LocalDensityJet, b, t: float, p: float, m: int, origin=None) -> np.ndarray:
    """Cubic Taylor polynomial of the unit-speed geodesic with direction b."""
    b = np.asarray(b, dtype=float)
    a = conformal_alpha(p, m)
    r, g, H = jet.rho0, jet.grad, jet.hess
    gb = float(g @ b)
    Hb = H @ b
    v = a * r ** (a - 1) * (0.5 * gb * b - 0.25 * g)
    c1 = ((a * a / 3 - a / 6) * r ** (1.5 * a - 2) * gb ** 2
          + (a / 6) * r ** (1.5 * a - 1) * float(Hb @ b)
          - (a * a / 12) * r ** (1.5 * a - 2) * float(g @ g))
    c2 = -(a / 12) * r ** (1.5 * a - 1)
    c3 = (a / 12 - a * a / 6) * r ** (1.5 * a - 2) * gb
    x = r ** (a / 2) * b * t + v * t ** 2 + (c1 * b + c2 * Hb + c3 * g) * t ** 3
    return x if origin is None else np.asarray(origin, dtype=float) + x


@dataclass
class FermatBall:
    center: np.ndarray
    radius: float
    angles: np.ndarray
    vertices: np.ndarray
    left_domain: np.ndarray
    crossed_kink: np.ndarray

    def polyline(self) -> np.ndarray:
        """Vertices closed by repeating the first one."""
        return np.vstack([self.vertices, self.vertices[:1]])

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("k,angle,x1,x2,left_domain\n")
            for k, (a, v, fl) in enumerate(zip(self.angles, self.vertices, self.left_domain)):
                f.write(f"{k},{a:.17g},{v[0]:.17g},{v[1]:.17g},{int(fl)}\n")


def fermat_ball(model: DensityModel, center, T: float, n_dirs: int, p: float, dt: float,
                m: Optional[int] = None) -> FermatBall:
    """Endpoints of unit-speed geodesics of length T, ordered by launch angle (2-D)."""
    if model.dim != 2:
        raise ConfigError("fermat_ball needs a 2-D domain")
    m = model.dim if m is None else m
    ang = 2 * np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    _, P, _, left, crossed = _shoot(model, center, dirs, p, T, dt, m)
    return FermatBall(np.asarray(center, dtype=float), T, ang, P[:, -1, :], left, crossed)


def _grid_axes(model, res):
    dom = model.domain
    return [np.linspace(a, b, res) for a, b in zip(dom.lo, dom.hi)]


def continuum_fermat_grid(model: DensityModel, x, y, p: float, grid_res: int = 256,
                          m: Optional[int] = None) -> float:
    """L_p^p(x, y) by Dijkstra on a regular grid.

    Stencil: all offsets in {-1, 0, 1}^m (8-connected in 2-D, 26 in 3-D, a
    periodic ring on the circle). Edge cost is its length times
    rho(midpoint)^((1-p)/m). The two endpoints are joined to the grid nodes of
    the surrounding 4^m block by straight segments costed the same way.
    """
    if grid_res < 32:
        raise GridTooCoarse(f"grid_res={grid_res} < 32")
    m = model.dim if m is None else m
    d = model.dim
    if d > 3:
        raise ConfigError("grid oracle limited to dimension <= 3")
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    for z in (x, y):
        if not model.domain.contains(z)[0]:
            raise OutOfDomain(f"{z} outside the domain")
    if np.array_equal(x, y):
        return 0.0
    expo = (1.0 - p) / m
    circle = model.domain.kind == "circle"

    def cost(A, B):
        seg = B - A
        if circle:
            seg = (seg + 0.5) % 1.0 - 0.5
            mid = np.mod(A + 0.5 * seg, 1.0)
        else:
            mid = 0.5 * (A + B)
        return np.linalg.norm(seg, axis=1) * model(mid) ** expo

    if circle:
        h = 1.0 / grid_res
        nodes = (np.arange(grid_res) * h)[:, None]
        ii = np.arange(grid_res)
        jj = (ii + 1) % grid_res
        ci = cost(nodes[ii], nodes[jj])
        steps = np.array([[0.0]])
    else:
        axes = _grid_axes(model, grid_res)
        spacing = np.array([ax[1] - ax[0] for ax in axes])
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.column_stack([g.ravel() for g in mesh])
        idx = np.arange(len(nodes)).reshape((grid_res,) * d)
        inside = model.domain.contains(nodes)
        ii_l, jj_l = [], []
        for off in itertools.product((-1, 0, 1), repeat=d):
            off = np.asarray(off)
            nz = np.nonzero(off)[0]
            if len(nz) == 0 or off[nz[0]] < 0:
                continue
            src = tuple(slice(max(0, -o), grid_res - max(0, o)) for o in off)
            dst = tuple(slice(max(0, o), grid_res - max(0, -o)) for o in off)
            a = idx[src].ravel()
            b = idx[dst].ravel()
            keep = inside[a] & inside[b]
            ii_l.append(a[keep])
            jj_l.append(b[keep])
        ii = np.concatenate(ii_l)
        jj = np.concatenate(jj_l)
        ci = cost(nodes[ii], nodes[jj])
        steps = spacing
    N = len(nodes)
    extra_i, extra_j, extra_c = [], [], []
    for t, z in enumerate((x, y)):
        zi = N + t
        if circle:
            base = int(np.floor(z[0] / h))
            nb = np.array([(base + o) % grid_res for o in (-1, 0, 1, 2)])
        else:
            lo = np.asarray(model.domain.lo)
            base = np.floor((z - lo) / steps).astype(int)
            ranges = [np.clip(np.arange(b - 1, b + 3), 0, grid_res - 1) for b in base]
            nb = np.unique(idx[np.ix_(*ranges)].ravel())
            nb = nb[inside[nb]]
        extra_i.append(np.full(len(nb), zi))
        extra_j.append(nb)
        extra_c.append(cost(np.repeat(z[None, :], len(nb), 0), nodes[nb]))
    if np.all(np.abs(x - y) <= 2 * steps):
        extra_i.append(np.array([N]))
        extra_j.append(np.array([N + 1]))
        extra_c.append(cost(x[None, :], y[None, :]))
    I = np.concatenate([ii] + extra_i)
    J = np.concatenate([jj] + extra_j)
    C = np.concatenate([ci] + extra_c)
    G = sp.csr_matrix((np.r_[C, C], (np.r_[I, J], np.r_[J, I])), shape=(N + 2, N + 2))
    G.sort_indices()
    dist = K.sssp_one(G.indptr, G.indices.astype(np.int64), G.data, N, np.inf, N + 1)
    return float(dist[N + 1])


@dataclass
class FermatExpansions:
    """Series relating Euclidean separation and L_p^p along direction u."""

    jet: LocalDensityJet
    u: np.ndarray
    p: float
    m: int

    @property
    def alpha(self) -> float:
        return conformal_alpha(self.p, self.m)

    def coefficients(self):
        """(c1, c2, c3) with ||y - x|| = c1 L + c2 L^2 + c3 L^3 + O(L^4)."""
        a = self.alpha
        r, g, H, u = self.jet.rho0, self.jet.grad, self.jet.hess, self.u
        gu = float(g @ u)
        c1 = r ** (a / 2)
        c2 = 0.5 * ((self.p - 1) / self.m) * gu * r ** (a - 1)
        c3 = r ** (1.5 * a - 2) * (a * a / 96 * float(g @ g) + (7 * a * a / 96 - a / 12) * gu ** 2
                                   + (a / 12) * r * float(u @ H @ u))
        return c1, c2, c3

    def euclid_from_L(self, L):
        c1, c2, c3 = self.coefficients()
        L = np.asarray(L, dtype=float)
        return c1 * L + c2 * L ** 2 + c3 * L ** 3

    def L_from_euclid(self, e):
        r, g, u = self.jet.rho0, self.jet.grad, self.u
        k = (self.p - 1) / self.m
        e = np.asarray(e, dtype=float)
        return r ** (-k) * (e - 0.5 * k * float(u @ g) / r * e ** 2)


def euclid_fermat_expansions(jet: LocalDensityJet, x, y, p: float, m: int) -> FermatExpansions:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.linalg.norm(y - x)
    if d == 0:
        raise ConfigError("x and y must differ")
    return FermatExpansions(jet, (y - x) / d, p, m)


def sectional_curvature_bound(K: float, beta: float, L1: float, L2: float, p: float, m: int) -> float:
    """Curvature bound of the conformal metric given bounds on the base curvature and on rho's derivatives."""
    if min(K, L1, L2) < 0 or beta <= 0 or p < 1:
        raise ConfigError("need K, L1, L2 >= 0, beta > 0 and p >= 1")
    a = conformal_alpha(p, m)
    q = (p - 1) / m
    return beta ** a * (K + 3 * beta ** 2 * q ** 2 * L1 ** 2 + 2 * beta ** 2 * q * L1 ** 2 + beta * q * L2)
