"""Flat key = value configuration shared by the CLI and the experiment drivers."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

# Model keys understood by model_from_config; commands that sample points carry them.
MODEL_KEYS = {
    "model": "disk_valley",
    "tau": 0.25,
    "amplitude": 0.5,
    "slope": (1.0, 0.0),
    "sigma": 0.2,
}

DEFAULTS = {
    "sample": dict(MODEL_KEYS, n=1000, ppp=False),
    "fermat_dist": dict(MODEL_KEYS, input="", n=500, p=2.0, m=0, mode="exact", knn_k=0, cutoff=0.0,
                        normalize=False),
    "laplacian": dict(MODEL_KEYS, input="", n=500, p=2.0, m=0, h=0.0, eps=0.01, prefactor=1.0,
                      laplacian="fermat_ps", s=2.0, j=2.0, q=2.0, r=0.0, scaled=True),
    "spectra": dict(MODEL_KEYS, input="", n=500, p=2.0, m=0, h=0.0, eps=0.01, prefactor=1.0,
                    laplacian="fermat_ps", s=2.0, j=2.0, q=2.0, r=0.0, scaled=True, K=10,
                    eig_method="auto"),
    "cluster_fd": dict(MODEL_KEYS, input="", n=1000, p=2.0, m=0, s=2.0, h=0.0, eps=0.01, prefactor=1.0,
                       r=2, k=2, mode="exact", knn_k=0, raw_lp=False, row_normalize=False,
                       eig_method="auto"),
    "cluster_dn": dict(MODEL_KEYS, input="", n=1000, m=0, q=2.0, j=2.0, h=0.0, eps=0.01, prefactor=1.0,
                       r=2, k=2, row_normalize=False, eig_method="auto"),
    "geodesic_ball": dict(slope=(1.0, 0.0), p=3.0, T=0.15, n_dirs=128, dt=1e-3, center=(0.0, 0.0)),
    "mu": dict(p=2.0, m=2, r=1.0, intensity=2000.0, replicates=200, padding=0.5),
    "two_partitions": dict(n=3000, strip_ratio=0.2, strip_width=0.25, grid_nodes=201,
                           p_grid=(1.0, 1.5, 2.0, 2.5, 3.0, 4.0), s=2.0, r=2, k=2, eps=0.01,
                           prefactor=0.7, mode="exact", eig_method="auto"),
    "eig_convergence": dict(model="disk_valley", tau=0.25, p=1.2, s=2.0, n_grid=(500, 1000, 2000, 4000),
                            K=10, replicates=1, eps=0.01, prefactor=1.5, eig_method="auto"),
    "circle_convergence": dict(amplitude=0.5, p_grid=(1.0,), smoke_p=2.0, smoke_n=500,
                               n_grid=(500, 1000, 2000, 4000), seeds=10, K=5, s=2.0, grid_n=2048,
                               eps=0.04, prefactor=1.5),
    "fermat_ball": dict(slope=(1.0, 0.0), p=3.0, T_grid=(0.15, 0.35), n_dirs=128, dt=1e-3,
                        center=(0.0, 0.0)),
}


def _parse(raw: str, like):
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(like, int):
            v = float(raw)
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            if raw == "":
                return ()
            kind = type(like[0]) if like else float
            return tuple(kind(float(x)) if kind is int else kind(x.strip()) for x in raw.split(","))
        return raw
    except ValueError as e:
        raise ConfigError(f"cannot parse {raw!r} as {type(like).__name__}") from e


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_format(x) for x in v)
    return str(v)


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    out_dir: str = "out"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(DEFAULTS)}")
        merged = dict(DEFAULTS[self.experiment])
        for k, v in self.params.items():
            if k not in merged:
                raise ConfigError(f"unknown key {k!r} for {self.experiment}")
            like = merged[k]
            merged[k] = _parse(v, like) if isinstance(v, str) and not isinstance(like, str) else v
        self.params = merged

    def __getitem__(self, key):
        return self.params[key]

    def with_updates(self, **kw) -> "ExperimentConfig":
        seed = kw.pop("seed", self.seed)
        out_dir = kw.pop("out_dir", self.out_dir)
        return ExperimentConfig(self.experiment, seed, out_dir, {**self.params, **kw})

    def to_text(self) -> str:
        lines = [f"experiment = {self.experiment}", f"seed = {self.seed}", f"out_dir = {self.out_dir}"]
        lines += [f"{k} = {_format(v)}" for k, v in self.params.items()]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_text())

    @staticmethod
    def from_text(text: str, experiment: str = None) -> "ExperimentConfig":
        kv = parse_pairs(text)
        exp = kv.pop("experiment", experiment)
        if exp is None:
            raise ConfigError("config has no experiment key")
        if experiment is not None and exp != experiment:
            raise ConfigError(f"config is for {exp!r}, not {experiment!r}")
        seed = _parse(kv.pop("seed", "0"), 0)
        out_dir = kv.pop("out_dir", "out")
        return ExperimentConfig(exp, seed, out_dir, kv)

    @staticmethod
    def load(path, experiment: str = None) -> "ExperimentConfig":
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return ExperimentConfig.from_text(text, experiment)


def parse_pairs(text: str) -> dict:
    out = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected key = value")
        k, v = line.split("=", 1)
        k = k.strip()
        if k in out:
            raise ConfigError(f"line {no}: duplicate key {k!r}")
        out[k] = v.strip()
    return out


def model_from_config(cfg: ExperimentConfig):
    """Density model named by the model keys of a sampling command."""
    from .sampling import DensityModel

    kind = cfg["model"]
    if kind == "disk_valley":
        return DensityModel.disk_valley(cfg["tau"])
    if kind == "gaussian_mixture_bg":
        return DensityModel.gaussian_mixture_bg(cfg["tau"], sigma=cfg["sigma"])
    if kind == "sine_circle":
        return DensityModel.sine_circle(cfg["amplitude"])
    if kind == "linear":
        return DensityModel.linear(cfg["slope"])
    if kind == "uniform":
        return DensityModel.uniform()
    if kind == "uniform_disk":
        return DensityModel.uniform(disk=True)
    raise ConfigError(f"unknown model {kind!r}")
