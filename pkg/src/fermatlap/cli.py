"""Command line entry point: `fermatlap <command> [--key value ...]`.

Every command reads the flat config keys listed in config.DEFAULTS. Values come
from the defaults, then `--config FILE`, then explicit flags. Exit codes: 0 on
success, 2 for configuration errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import experiments
from .config import DEFAULTS, ExperimentConfig, _format, model_from_config
from .errors import ConfigError, EpsOutOfRange, FermatError, StageError

# errors caused by an inadmissible parameter value rather than by the numerics
USER_ERRORS = (ConfigError, EpsOutOfRange)

COMMANDS = {
    "sample": "sample",
    "fermat-dist": "fermat_dist",
    "laplacian": "laplacian",
    "spectra": "spectra",
    "cluster-fd": "cluster_fd",
    "cluster-dn": "cluster_dn",
    "geodesic-ball": "geodesic_ball",
    "estimate-mu": "mu",
}
EXPERIMENTS = {
    "two-partitions": "two_partitions",
    "eig-convergence": "eig_convergence",
    "circle-convergence": "circle_convergence",
    "fermat-ball": "fermat_ball",
}


def _add_common(sp, experiment):
    sp.add_argument("--config", help="flat key = value file")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dir")
    for key, val in DEFAULTS[experiment].items():
        flag = "--" + key.replace("_", "-")
        kw = {"dest": "k_" + key, "default": None, "help": f"default: {_format(val)}"}
        if isinstance(val, bool):
            kw.update(nargs="?", const="true")
        sp.add_argument(flag, **kw)
    sp.set_defaults(experiment=experiment)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fermatlap", description="Fermat distances and graph Laplacians.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, exp in COMMANDS.items():
        _add_common(sub.add_parser(name), exp)
    ex = sub.add_parser("exp", help="run an experiment").add_subparsers(dest="which", required=True)
    for name, exp in EXPERIMENTS.items():
        sp = ex.add_parser(name)
        _add_common(sp, exp)
        sp.add_argument("--no-plots", action="store_true", help="skip the SVG figures")
    return ap


def config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config, args.experiment)
    else:
        cfg = ExperimentConfig(args.experiment)
    over = {k[2:]: v for k, v in vars(args).items() if k.startswith("k_") and v is not None}
    upd = dict(over)
    if args.seed is not None:
        upd["seed"] = args.seed
    if args.out_dir is not None:
        upd["out_dir"] = args.out_dir
    return cfg.with_updates(**upd) if upd else cfg


# helpers -------------------------------------------------------------------

def _cloud(cfg):
    from .sampling import PointCloud, sample_iid

    if cfg["input"]:
        m = cfg["m"] or None
        cloud = PointCloud.from_csv(cfg["input"], intrinsic_dim=m, seed=cfg.seed)
        return cloud, 1.0
    model = model_from_config(cfg)
    return sample_iid(model, cfg["n"], cfg.seed), model.beta


def _dim(cfg, cloud):
    return cfg["m"] or cloud.intrinsic_dim


def _bandwidth(cfg, n, m, p, beta, mu):
    from .graph_laplacian import bandwidth_rule

    if cfg["h"] > 0:
        return cfg["h"]
    return bandwidth_rule(n, m, cfg["eps"], p, beta, mu, cfg["prefactor"])


def _graph_and_spec(cfg):
    from .clustering import fermat_graph
    from .graph_laplacian import LaplacianSpec
    from .percolation import reference_mu

    cloud, beta = _cloud(cfg)
    m = _dim(cfg, cloud)
    p = cfg["p"]
    mu = reference_mu(p, m)
    h = _bandwidth(cfg, cloud.n, m, p, beta, mu)
    G = fermat_graph(cloud, p, h, mu=mu)
    spec = LaplacianSpec(cfg["laplacian"], h, m, cloud.n, j=cfg["j"], q=cfg["q"], r=cfg["r"], p=p, s=cfg["s"],
                         scaled=cfg["scaled"])
    return cloud, G, spec


def _path(cfg, name):
    return os.path.join(cfg.out_dir, name)


def _json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True, default=float)


# commands ------------------------------------------------------------------

def cmd_sample(cfg):
    from .sampling import sample_iid, sample_ppp

    model = model_from_config(cfg)
    cloud = sample_ppp(model, cfg["n"], cfg.seed) if cfg["ppp"] else sample_iid(model, cfg["n"], cfg.seed)
    cloud.to_csv(_path(cfg, "points.csv"))
    print(f"{cloud.n} points -> {_path(cfg, 'points.csv')}")


def cmd_fermat_dist(cfg):
    from .fermat import FermatParams, fermat_pairwise, normalize_fermat

    cloud, _ = _cloud(cfg)
    params = FermatParams(cfg["p"], _dim(cfg, cloud), cfg["mode"], cfg["knn_k"] or None)
    dm = fermat_pairwise(cloud, params, cutoff=cfg["cutoff"] or None)
    if cfg["normalize"]:
        dm = normalize_fermat(dm, cloud.n, params)
    dm.to_csv(_path(cfg, "distances.csv"))
    print(f"{cloud.n} x {cloud.n} distances -> {_path(cfg, 'distances.csv')}")


def cmd_laplacian(cfg):
    from .graph_laplacian import laplacian_matrix

    _, G, spec = _graph_and_spec(cfg)
    G.to_triplet_csv(_path(cfg, "weights.csv"))
    L = laplacian_matrix(spec, G).tocoo()
    with open(_path(cfg, "laplacian.csv"), "w") as f:
        f.write("i,j,value\n")
        for i, j, v in zip(L.row, L.col, L.data):
            f.write(f"{i},{j},{v:.17g}\n")
    print(f"h={spec.h:.6g}, {L.nnz} nonzeros -> {_path(cfg, 'laplacian.csv')}")


def cmd_spectra(cfg):
    from .spectral import eig_smallest

    _, G, spec = _graph_and_spec(cfg)
    dec = eig_smallest(spec, G, cfg["K"], method=cfg["eig_method"], require_connected=False)
    dec.to_csv(_path(cfg, "spectrum.csv"))
    np.savetxt(_path(cfg, "eigenvectors.csv"), dec.eigenvectors, delimiter=",", fmt="%.17g",
               header=",".join(f"v{k + 1}" for k in range(dec.eigenvectors.shape[1])), comments="")
    print("eigenvalues: " + " ".join(f"{v:.6g}" for v in dec.eigenvalues))


def _cluster_out(cfg, res, reference=None):
    res.assignment.to_csv(_path(cfg, "labels.csv"))
    res.spectrum.to_csv(_path(cfg, "spectrum.csv"))
    _json(_path(cfg, "provenance.json"), {**res.provenance, "timings": res.timings})
    print(f"labels -> {_path(cfg, 'labels.csv')} (inertia {res.assignment.inertia:.6g})")


def cmd_cluster_fd(cfg):
    from .clustering import spectral_cluster_fd
    from .percolation import reference_mu

    cloud, beta = _cloud(cfg)
    m = _dim(cfg, cloud)
    p = cfg["p"]
    mu = 1.0 if cfg["raw_lp"] else reference_mu(p, m)
    h = _bandwidth(cfg, cloud.n, m, p, beta, mu)
    res = spectral_cluster_fd(cloud, p, cfg["s"], h, cfg["r"], cfg["k"], cfg.seed, mode=cfg["mode"],
                              knn_k=cfg["knn_k"] or None, raw_lp=cfg["raw_lp"], mu=mu,
                              method=cfg["eig_method"], row_normalize=cfg["row_normalize"])
    _cluster_out(cfg, res)


def cmd_cluster_dn(cfg):
    from .clustering import spectral_cluster_dn

    cloud, beta = _cloud(cfg)
    m = _dim(cfg, cloud)
    h = _bandwidth(cfg, cloud.n, m, 1.0, beta, 1.0)
    res = spectral_cluster_dn(cloud, cfg["q"], cfg["j"], h, cfg["r"], cfg["k"], cfg.seed,
                              method=cfg["eig_method"], row_normalize=cfg["row_normalize"])
    _cluster_out(cfg, res)


def cmd_geodesic_ball(cfg):
    from .geometry import fermat_ball
    from .sampling import DensityModel

    model = DensityModel.linear(cfg["slope"])
    ball = fermat_ball(model, np.asarray(cfg["center"]), cfg["T"], cfg["n_dirs"], cfg["p"], cfg["dt"])
    ball.to_csv(_path(cfg, "ball.csv"))
    print(f"{len(ball.vertices)} vertices -> {_path(cfg, 'ball.csv')}")


def cmd_mu(cfg):
    from .percolation import estimate_mu

    est = estimate_mu(cfg["p"], cfg["m"], cfg["r"], cfg["intensity"], cfg["replicates"], cfg.seed,
                      cfg["padding"])
    est.to_csv(_path(cfg, "mu.csv"))
    print(f"mu = {est.mean:.6g} +- {est.stderr:.2g} ({est.replicates} replicates)")


HANDLERS = {
    "sample": cmd_sample,
    "fermat_dist": cmd_fermat_dist,
    "laplacian": cmd_laplacian,
    "spectra": cmd_spectra,
    "cluster_fd": cmd_cluster_fd,
    "cluster_dn": cmd_cluster_dn,
    "geodesic_ball": cmd_geodesic_ball,
    "mu": cmd_mu,
}


def run_experiment(cfg: ExperimentConfig, plots: bool = True):
    experiments.run(cfg)
    paths = []
    if plots:
        from .plotting import render

        paths = render(cfg.experiment, cfg.out_dir)
    return paths


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        os.makedirs(cfg.out_dir, exist_ok=True)
        if args.command == "exp":
            paths = run_experiment(cfg, plots=not args.no_plots)
            print(f"{cfg.experiment}: tables and {len(paths)} figure(s) in {cfg.out_dir}")
        else:
            cfg.save(_path(cfg, "config.txt"))
            HANDLERS[cfg.experiment](cfg)
    except USER_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.cause, USER_ERRORS) else 3
    except FermatError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
