"""Density models on flat domains and i.i.d. / Poisson point clouds."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, NonfiniteDensity, OutOfDomain
from .rng import stream

QUAD_NODES = 512
DOMAIN_TOL = 1e-12
KINDS = ("uniform", "linear", "disk_valley", "gaussian_mixture_bg", "custom_grid", "sine_circle")


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box, the unit disk, or the unit-length circle R/Z."""

    kind: str
    lo: tuple = ()
    hi: tuple = ()

    @staticmethod
    def box(lo, hi) -> "Domain":
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError(f"bad box {lo} {hi}")
        return Domain("box", lo, hi)

    @staticmethod
    def disk() -> "Domain":
        return Domain("disk", (-1.0, -1.0), (1.0, 1.0))

    @staticmethod
    def circle() -> "Domain":
        return Domain("circle", (0.0,), (1.0,))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        if self.kind == "disk":
            return float(np.pi)
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "circle":
            return np.isfinite(x[:, 0])
        if self.kind == "disk":
            return np.einsum("ij,ij->i", x, x) <= 1.0 + DOMAIN_TOL
        lo = np.asarray(self.lo) - DOMAIN_TOL
        hi = np.asarray(self.hi) + DOMAIN_TOL
        return np.all((x >= lo) & (x <= hi), axis=1)

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "disk":
            r = np.sqrt(rng.random(n))
            th = 2 * np.pi * rng.random(n)
            return np.column_stack([r * np.cos(th), r * np.sin(th)])
        lo = np.asarray(self.lo)
        return lo + (np.asarray(self.hi) - lo) * rng.random((n, self.dim))

    def quadrature(self, nodes: int = QUAD_NODES):
        """Tensor-grid nodes and weights integrating over the domain."""
        if self.kind == "circle":
            s = (np.arange(nodes) + 0.5) / nodes
            return s[:, None], np.full(nodes, 1.0 / nodes)
        t, w = np.polynomial.legendre.leggauss(nodes)
        if self.kind == "disk":
            # polar grid: Gauss-Legendre in r, midpoint rule in angle (periodic)
            r = 0.5 * (t + 1.0)
            wr = 0.5 * w * r
            th = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
            R, TH = np.meshgrid(r, th, indexing="ij")
            pts = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
            wts = np.outer(wr, np.full(nodes, 2 * np.pi / nodes)).ravel()
            return pts, wts
        axes, wax = [], []
        for a, b in zip(self.lo, self.hi):
            axes.append(a + 0.5 * (b - a) * (t + 1.0))
            wax.append(0.5 * (b - a) * w)
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
        wts = wax[0]
        for wa in wax[1:]:
            wts = np.multiply.outer(wts, wa)
        return pts, np.ravel(wts)


def circle_embed(s) -> np.ndarray:
    """Map arc-length coordinates on R/Z to the circle of circumference 1 in R^2."""
    s = np.asarray(s, dtype=float).reshape(-1)
    r = 1.0 / (2 * np.pi)
    return np.column_stack([r * np.cos(2 * np.pi * s), r * np.sin(2 * np.pi * s)])


@dataclass
class DensityModel:
    """A probability density on a flat domain.

    `params` holds the kind-specific parameters; the raw (unnormalized) profile
    is divided by `normalization` so that the density integrates to one.
    `envelope` is a guaranteed upper bound of the raw profile, used by the
    rejection sampler; `beta` is the reported sandwich constant with
    1/beta <= rho <= beta on the domain.
    """

    kind: str
    params: dict
    domain: Domain
    normalization: float = field(init=False)
    envelope: float = field(init=False)
    beta: float = field(init=False)
    rho_min: float = field(init=False)
    rho_max: float = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown density kind {self.kind!r}")
        self._check_params()
        pts, wts = self.domain.quadrature()
        vals = self._raw(pts)
        self.normalization = float(np.dot(wts, vals))
        lo, hi = self._raw_bounds(vals)
        self.envelope = float(self._raw_envelope(hi))
        self.rho_min = lo / self.normalization
        self.rho_max = hi / self.normalization
        self.beta = float(max(self.rho_max, 1.0 / self.rho_min))

    # constructors --------------------------------------------------------
    @staticmethod
    def uniform(lo=(0.0, 0.0), hi=(1.0, 1.0), disk: bool = False) -> "DensityModel":
        dom = Domain.disk() if disk else Domain.box(lo, hi)
        return DensityModel("uniform", {}, dom)

    @staticmethod
    def linear(slope=(1.0, 0.0), lo=(-0.5, -0.5), hi=(0.5, 0.5)) -> "DensityModel":
        return DensityModel("linear", {"slope": tuple(float(v) for v in slope)}, Domain.box(lo, hi))

    @staticmethod
    def disk_valley(tau: float = 0.25) -> "DensityModel":
        return DensityModel("disk_valley", {"tau": float(tau)}, Domain.disk())

    @staticmethod
    def gaussian_mixture_bg(tau: float = 0.1, means=((-0.5, 0.0), (0.5, 0.0)), sigma: float = 0.2,
                            lo=(-1.0, -1.0), hi=(1.0, 1.0)) -> "DensityModel":
        means = tuple(tuple(float(v) for v in mu) for mu in means)
        return DensityModel("gaussian_mixture_bg",
                            {"tau": float(tau), "means": means, "sigma": float(sigma)},
                            Domain.box(lo, hi))

    @staticmethod
    def custom_grid(values, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> "DensityModel":
        v = np.asarray(values, dtype=float)
        return DensityModel("custom_grid", {"values": v}, Domain.box(lo, hi))

    @staticmethod
    def sine_circle(amplitude: float = 0.5) -> "DensityModel":
        return DensityModel("sine_circle", {"amplitude": float(amplitude)}, Domain.circle())

    # properties ----------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def has_hessian(self) -> bool:
        return self.kind != "custom_grid"

    @property
    def smooth(self) -> bool:
        return self.kind not in ("gaussian_mixture_bg", "custom_grid")

    @property
    def tag(self) -> str:
        bits = [self.kind]
        for k, v in sorted(self.params.items()):
            if k == "values":
                v = f"grid{np.shape(v)}"
            bits.append(f"{k}={v}")
        return ";".join(bits)

    # raw profile ---------------------------------------------------------
    def _check_params(self):
        k, p = self.kind, self.params
        if k == "linear":
            if len(p["slope"]) != self.dim:
                raise ConfigError("slope length must match the box dimension")
            corners = np.array(np.meshgrid(*zip(self.domain.lo, self.domain.hi))).reshape(self.dim, -1).T
            if np.any(1.0 + corners @ np.asarray(p["slope"]) <= 0):
                raise ConfigError("linear density must stay positive on the box")
        elif k in ("disk_valley", "gaussian_mixture_bg"):
            if not p["tau"] > 0:
                raise ConfigError("tau must be positive")
            if k == "gaussian_mixture_bg" and not p["sigma"] > 0:
                raise ConfigError("sigma must be positive")
        elif k == "custom_grid":
            v = p["values"]
            if v.ndim != self.dim or min(v.shape) < 2 or not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ConfigError("grid values must be a positive finite array with >= 2 nodes per axis")
        elif k == "sine_circle":
            if not 0 <= p["amplitude"] < 1:
                raise ConfigError("amplitude must lie in [0, 1)")

    def _raw(self, x: np.ndarray) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "uniform":
            return np.ones(len(x))
        if k == "linear":
            return 1.0 + x @ np.asarray(p["slope"])
        if k == "disk_valley":
            return 1.0 / (p["tau"] + x[:, 0] ** 2)
        if k == "gaussian_mixture_bg":
            return np.maximum(self._bumps(x), p["tau"])
        if k == "custom_grid":
            return self._bilinear(x)[0]
        return 1.0 + p["amplitude"] * np.sin(2 * np.pi * x[:, 0])

    def _bumps(self, x):
        s2 = 2 * self.params["sigma"] ** 2
        out = np.zeros(len(x))
        for mu in self.params["means"]:
            out += np.exp(-np.sum((x - np.asarray(mu)) ** 2, axis=1) / s2)
        return out

    def _raw_grad(self, x: np.ndarray) -> np.ndarray:
        k, p = self.kind, self.params
        g = np.zeros_like(x)
        if k == "linear":
            g[:] = np.asarray(p["slope"])
        elif k == "disk_valley":
            g[:, 0] = -2 * x[:, 0] / (p["tau"] + x[:, 0] ** 2) ** 2
        elif k == "gaussian_mixture_bg":
            s2 = p["sigma"] ** 2
            on = self._bumps(x) > p["tau"]
            for mu in p["means"]:
                d = x - np.asarray(mu)
                e = np.exp(-np.sum(d * d, axis=1) / (2 * s2))
                g -= (e / s2)[:, None] * d
            g[~on] = 0.0
        elif k == "custom_grid":
            g = self._bilinear(x)[1]
        elif k == "sine_circle":
            g[:, 0] = 2 * np.pi * p["amplitude"] * np.cos(2 * np.pi * x[:, 0])
        return g

    def _raw_hess(self, x: np.ndarray) -> np.ndarray:
        k, p = self.kind, self.params
        n, d = x.shape
        H = np.zeros((n, d, d))
        if k == "disk_valley":
            t = p["tau"] + x[:, 0] ** 2
            H[:, 0, 0] = (6 * x[:, 0] ** 2 - 2 * p["tau"]) / t ** 3
        elif k == "gaussian_mixture_bg":
            s2 = p["sigma"] ** 2
            on = self._bumps(x) > p["tau"]
            for mu in p["means"]:
                dd = x - np.asarray(mu)
                e = np.exp(-np.sum(dd * dd, axis=1) / (2 * s2))
                H += e[:, None, None] * (np.einsum("ni,nj->nij", dd, dd) / s2 ** 2 - np.eye(d) / s2)
            H[~on] = 0.0
        elif k == "sine_circle":
            H[:, 0, 0] = -(2 * np.pi) ** 2 * p["amplitude"] * np.sin(2 * np.pi * x[:, 0])
        elif k == "custom_grid":
            raise NotImplementedError("custom_grid declares no Hessian")
        return H

    def _bilinear(self, x):
        v = self.params["values"]
        d = self.dim
        lo, hi = np.asarray(self.domain.lo), np.asarray(self.domain.hi)
        cells = np.asarray(v.shape) - 1
        u = (x - lo) / (hi - lo) * cells
        i0 = np.clip(np.floor(u).astype(int), 0, cells - 1)
        f = u - i0
        val = np.zeros(len(x))
        grad = np.zeros_like(x)
        for corner in np.ndindex(*(2,) * d):
            c = np.asarray(corner)
            idx = tuple((i0 + c).T)
            wts = np.where(c == 1, f, 1 - f)
            w = np.prod(wts, axis=1)
            val += w * v[idx]
            for a in range(d):
                others = np.prod(np.delete(wts, a, axis=1), axis=1)
                grad[:, a] += (1 if c[a] else -1) * others * v[idx]
        grad *= cells / (hi - lo)
        return val, grad

    def _raw_bounds(self, grid_vals):
        k, p = self.kind, self.params
        if k == "uniform":
            return 1.0, 1.0
        if k == "linear":
            corners = np.array(np.meshgrid(*zip(self.domain.lo, self.domain.hi))).reshape(self.dim, -1).T
            vals = 1.0 + corners @ np.asarray(p["slope"])
            return float(vals.min()), float(vals.max())
        if k == "disk_valley":
            return 1.0 / (p["tau"] + 1.0), 1.0 / p["tau"]
        if k == "custom_grid":
            return float(p["values"].min()), float(p["values"].max())
        if k == "sine_circle":
            return 1.0 - p["amplitude"], 1.0 + p["amplitude"]
        # mixture: floor is tau or higher; peak taken from the dense grid and the means
        means = np.asarray(p["means"])
        inside = means[self.domain.contains(means)]
        peak = max(float(grid_vals.max()), float(self._raw(inside).max()) if len(inside) else 0.0)
        low = float(min(grid_vals.min(), self._raw(self._corners()).min()))
        return low, peak

    def _corners(self):
        return np.array(np.meshgrid(*zip(self.domain.lo, self.domain.hi))).reshape(self.dim, -1).T

    def _raw_envelope(self, peak):
        if self.kind == "gaussian_mixture_bg":
            return max(float(len(self.params["means"])), self.params["tau"])
        return peak

    # public evaluation -----------------------------------------------------
    def _prep(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1 and (x.ndim == 0 or self.dim > 1 or x.size == 1)
        x = x.reshape(-1, self.dim)
        if not np.all(self.domain.contains(x)):
            raise OutOfDomain(f"point outside the {self.domain.kind} domain")
        if self.domain.kind == "circle":
            x = np.mod(x, 1.0)
        return x, single

    def __call__(self, x):
        x, single = self._prep(x)
        v = self._raw(x) / self.normalization
        return float(v[0]) if single else v

    def gradient(self, x):
        x, single = self._prep(x)
        g = self._raw_grad(x) / self.normalization
        return g[0] if single else g

    def hessian(self, x):
        x, single = self._prep(x)
        H = self._raw_hess(x) / self.normalization
        return H[0] if single else H

    # flat key = value config -------------------------------------------
    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        p = self.params
        if self.domain.kind == "box":
            cfg["box_lo"] = ",".join(repr(v) for v in self.domain.lo)
            cfg["box_hi"] = ",".join(repr(v) for v in self.domain.hi)
        if self.kind == "uniform" and self.domain.kind == "disk":
            cfg["disk"] = "true"
        if "tau" in p:
            cfg["tau"] = repr(p["tau"])
        if "slope" in p:
            cfg["slope"] = ",".join(repr(v) for v in p["slope"])
        if "sigma" in p:
            cfg["sigma"] = repr(p["sigma"])
        if "means" in p:
            cfg["means"] = ";".join(",".join(repr(v) for v in mu) for mu in p["means"])
        if "amplitude" in p:
            cfg["amplitude"] = repr(p["amplitude"])
        if "values" in p:
            cfg["grid_shape"] = ",".join(str(s) for s in p["values"].shape)
            cfg["grid_values"] = ",".join(repr(float(v)) for v in p["values"].ravel())
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "DensityModel":
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)

        def vec(key, default):
            if key not in cfg:
                return default
            return tuple(float(v) for v in str(cfg.pop(key)).split(","))

        try:
            lo = vec("box_lo", None)
            hi = vec("box_hi", None)
            box = {} if lo is None else {"lo": lo, "hi": hi}
            if kind == "uniform":
                disk = str(cfg.pop("disk", "false")).lower() == "true"
                m = DensityModel.uniform(disk=disk, **box)
            elif kind == "linear":
                m = DensityModel.linear(slope=vec("slope", (1.0, 0.0)), **box)
            elif kind == "disk_valley":
                m = DensityModel.disk_valley(float(cfg.pop("tau", 0.25)))
            elif kind == "gaussian_mixture_bg":
                kw = dict(box)
                if "means" in cfg:
                    kw["means"] = [tuple(float(v) for v in s.split(",")) for s in str(cfg.pop("means")).split(";")]
                m = DensityModel.gaussian_mixture_bg(float(cfg.pop("tau", 0.1)),
                                                     sigma=float(cfg.pop("sigma", 0.2)), **kw)
            elif kind == "custom_grid":
                shape = tuple(int(v) for v in str(cfg.pop("grid_shape")).split(","))
                vals = np.array([float(v) for v in str(cfg.pop("grid_values")).split(",")]).reshape(shape)
                m = DensityModel.custom_grid(vals, **box)
            elif kind == "sine_circle":
                m = DensityModel.sine_circle(float(cfg.pop("amplitude", 0.5)))
            else:
                raise ConfigError(f"unknown density kind {kind!r}")
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad density config: {e}") from e
        if cfg:
            raise ConfigError(f"unknown density keys: {sorted(cfg)}")
        return m


def eval_density(model: DensityModel, x):
    """rho(x); raises OutOfDomain outside the support."""
    return model(x)


@dataclass
class PointCloud:
    """n points in R^D tagged with intrinsic dimension and provenance.

    `coords` holds intrinsic coordinates when they differ from the embedding
    (arc length on the circle); otherwise it is None.
    """

    points: np.ndarray
    intrinsic_dim: int
    seed: int = 0
    model_tag: str = ""
    count: Optional[int] = None
    coords: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.count is None:
            self.count = len(self.points)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def intrinsic(self) -> np.ndarray:
        return self.points if self.coords is None else self.coords

    def to_csv(self, path=None) -> str:
        D = self.ambient_dim
        buf = io.StringIO()
        buf.write(",".join(f"x{i + 1}" for i in range(D)) + "\n")
        for row in self.points:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
        return text

    @staticmethod
    def from_csv(path, intrinsic_dim: Optional[int] = None, seed: int = 0, model_tag: str = "") -> "PointCloud":
        with open(path) as f:
            header = f.readline().strip().split(",")
            if not header or not all(h.startswith("x") for h in header):
                raise ConfigError(f"{path}: expected header x1,...,xD")
            rows = [[float(v) for v in line.split(",")] for line in f if line.strip()]
        pts = np.array(rows, dtype=float).reshape(-1, len(header))
        return PointCloud(pts, intrinsic_dim or len(header), seed, model_tag or str(path))


def _draw(model: DensityModel, n: int, rng: np.random.Generator) -> np.ndarray:
    out = []
    need = n
    volume_mass = model.normalization / (model.envelope * model.domain.volume)
    while need > 0:
        batch = int(1.25 * need / max(volume_mass, 1e-6)) + 16
        prop = model.domain.uniform(rng, batch)
        f = model._raw(prop)
        if not np.all(np.isfinite(f)) or np.any(f > model.envelope * (1 + 1e-12)) or np.any(f <= 0):
            raise NonfiniteDensity("density left its envelope at a proposal")
        keep = prop[rng.random(batch) * model.envelope < f]
        out.append(keep[:need])
        need -= len(out[-1])
    return np.concatenate(out, axis=0) if out else np.empty((0, model.dim))


def _cloud(model, x, seed, count=None):
    if model.domain.kind == "circle":
        return PointCloud(circle_embed(x[:, 0]), 1, seed, model.tag, count, coords=x)
    return PointCloud(x, model.dim, seed, model.tag, count)


def sample_iid(model: DensityModel, n: int, seed: int, stream_index: int = 0) -> PointCloud:
    """n i.i.d. draws by rejection against the uniform envelope of the domain."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    x = _draw(model, int(n), stream(seed, stream_index))
    return _cloud(model, x, seed)


def sample_ppp(model: DensityModel, intensity_n: float, seed: int, stream_index: int = 0) -> PointCloud:
    """Poisson process: N ~ Poisson(intensity_n) then N i.i.d. draws. Empty clouds allowed."""
    if not intensity_n > 0:
        raise ConfigError("intensity must be positive")
    rng = stream(seed, stream_index)
    N = int(rng.poisson(intensity_n))
    x = _draw(model, N, rng) if N else np.empty((0, model.dim))
    return _cloud(model, x, seed, count=N)
