"""SVG figures rendered from experiment CSVs only (the CSVs are the source of truth)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "fermatlap"
plt.rcParams["svg.fonttype"] = "none"


def _read(path):
    data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
    return np.atleast_1d(data)


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _tag(p):
    return f"{p:g}".replace(".", "_")


def plot_two_partitions(out_dir: str) -> list:
    tab = _read(os.path.join(out_dir, "two_partitions.csv"))
    pts = np.loadtxt(os.path.join(out_dir, "points.csv"), delimiter=",", skiprows=1, ndmin=2)
    paths = []
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(tab["p"], tab["accuracy_vs_geometric"], "o-", label="geometric cut")
    ax.plot(tab["p"], tab["accuracy_vs_density"], "s-", label="density cut")
    ax.set_xlabel("p")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.45, 1.02)
    ax.legend()
    paths.append(_save(fig, os.path.join(out_dir, "two_partitions.svg")))
    for p in tab["p"]:
        lab = np.loadtxt(os.path.join(out_dir, f"labels_p{_tag(p)}.csv"), delimiter=",", skiprows=1,
                         ndmin=2)[:, 1]
        fig, ax = plt.subplots(figsize=(2.2, 6))
        ax.scatter(pts[:, 0], pts[:, 1], c=lab, s=2, cmap="coolwarm", linewidths=0)
        ax.set_aspect("equal")
        ax.set_title(f"p = {p:g}")
        paths.append(_save(fig, os.path.join(out_dir, f"scatter_p{_tag(p)}.svg")))
    return paths


def plot_eig_convergence(out_dir: str) -> list:
    tab = _read(os.path.join(out_dir, "eig_convergence.csv"))
    summ = _read(os.path.join(out_dir, "eig_convergence_summary.csv"))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    ax = axes[0]
    nmax = tab["n"].max()
    sel = (tab["n"] == nmax) & (tab["replicate"] == 0)
    ax.plot(tab["k"][sel], tab["lambda_fermat"][sel], "o-", label="Fermat")
    ax.plot(tab["k"][sel], tab["lambda_dn_euclid"][sel], "s--", label="rescaled Euclidean")
    ax.plot(tab["k"][sel], tab["lambda_plain_euclid"][sel], "^:", label="random walk")
    ax.set_xlabel("k")
    ax.set_ylabel("eigenvalue")
    ax.set_title(f"n = {int(nmax)}")
    ax.legend()
    ax = axes[1]
    ax.loglog(summ["n"], summ["median_rel_gap"], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("median relative gap")
    fig.tight_layout()
    path = _save(fig, os.path.join(out_dir, "eig_convergence.svg"))
    out = [path]
    tpath = os.path.join(out_dir, "timings.csv")
    if os.path.exists(tpath):
        t = _read(tpath)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.loglog(t["n"], t["fermat_s"], "o-", label="Fermat")
        ax.loglog(t["n"], t["dn_euclid_s"], "s--", label="rescaled Euclidean")
        ax.set_xlabel("n")
        ax.set_ylabel("seconds")
        ax.legend()
        out.append(_save(fig, os.path.join(out_dir, "timings.svg")))
    return out


def plot_circle_convergence(out_dir: str) -> list:
    summ = _read(os.path.join(out_dir, "circle_convergence_summary.csv"))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for p in np.unique(summ["p"]):
        sel = summ["p"] == p
        ax.loglog(summ["n"][sel], summ["median_rel_err_lambda2"][sel], "o-", label=f"p = {p:g}")
    ax.set_xlabel("n")
    ax.set_ylabel("median relative error of lambda_2")
    ax.legend()
    return [_save(fig, os.path.join(out_dir, "circle_convergence.svg"))]


def plot_fermat_ball(out_dir: str) -> list:
    tab = _read(os.path.join(out_dir, "fermat_ball.csv"))
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for T in np.unique(tab["T"]):
        sel = tab["T"] == T
        x = np.r_[tab["x1"][sel], tab["x1"][sel][:1]]
        y = np.r_[tab["x2"][sel], tab["x2"][sel][:1]]
        ax.plot(x, y, "-", label=f"T = {T:g}")
    ax.plot([0], [0], "k+")
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.legend()
    return [_save(fig, os.path.join(out_dir, "fermat_ball.svg"))]


PLOTTERS = {
    "two_partitions": plot_two_partitions,
    "eig_convergence": plot_eig_convergence,
    "circle_convergence": plot_circle_convergence,
    "fermat_ball": plot_fermat_ball,
}


def render(experiment: str, out_dir: str) -> list:
    return PLOTTERS[experiment](out_dir)
