import numpy as np
import pytest

from fermatlap.cli import main
from fermatlap.config import ExperimentConfig
from fermatlap.experiments import crossings, golden_files, reference_partitions, run, strip_model
from fermatlap.plotting import render

SMALL = {
    "two_partitions": {"n": 400, "p_grid": (1.0, 4.0)},
    "eig_convergence": {"n_grid": (200, 300), "K": 4, "p": 1.5},
    "circle_convergence": {"n_grid": (200, 400), "seeds": 2, "smoke_n": 200, "grid_n": 256, "K": 3},
    "fermat_ball": {"n_dirs": 16, "T_grid": (0.1,)},
}


def run_small(exp, out, seed=0):
    cfg = ExperimentConfig(exp, seed=seed, out_dir=str(out), params=SMALL[exp])
    result = run(cfg)
    return cfg, result


@pytest.mark.parametrize("exp", sorted(SMALL))
def test_small_runs_are_reproducible(tmp_path, exp):
    run_small(exp, tmp_path / "a")
    run_small(exp, tmp_path / "b")
    names = golden_files(tmp_path / "a")
    assert names and "timings.csv" not in names
    assert names == golden_files(tmp_path / "b")
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert (tmp_path / "a" / "config.txt").exists()


@pytest.mark.parametrize("exp", sorted(SMALL))
def test_figures_render_deterministically(tmp_path, exp):
    run_small(exp, tmp_path)
    first = {p: open(p, "rb").read() for p in render(exp, str(tmp_path))}
    assert first and all(p.endswith(".svg") and b.startswith(b"<?xml") for p, b in first.items())
    second = {p: open(p, "rb").read() for p in render(exp, str(tmp_path))}
    assert first == second


def test_sidecar_reproduces_run(tmp_path):
    cfg, _ = run_small("fermat_ball", tmp_path / "a")
    again = ExperimentConfig.load(tmp_path / "a" / "config.txt").with_updates(out_dir=str(tmp_path / "b"))
    run(again)
    for name in golden_files(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_strip_model_and_references():
    model = strip_model(0.2, 0.25)
    assert model(np.array([[0.5, 1.0]]))[0] == pytest.approx(0.2 * model(np.array([[0.1, 1.0]]))[0])
    pts = np.array([[0.2, 0.5], [0.8, 3.0]])
    geo, dens = reference_partitions(pts)
    assert list(geo) == [1, 0] and list(dens) == [1, 0]


def test_crossings():
    rows = [(1, 0, 0.9, 0.5), (2, 0, 0.6, 0.6), (3, 0, 0.5, 0.9), (4, 0, 0.5, 0.95)]
    assert crossings(rows) == 1
    assert crossings(rows + [(5, 0, 0.99, 0.5)]) == 2
    assert crossings(rows[:1]) == 0


def test_fermat_ball_extents(tmp_path):
    _, res = run_small("fermat_ball", tmp_path)
    T, px, mx, py, my = res["extents"][0]
    assert px > mx
    assert py == pytest.approx(my, rel=1e-2)


def test_eig_convergence_p1_coincide(tmp_path):
    cfg = ExperimentConfig("eig_convergence", out_dir=str(tmp_path),
                           params={"n_grid": (200,), "K": 4, "p": 1.0})
    res = run(cfg)
    for n, rep, k, lf, ld, lr in res["rows"]:
        assert lf == pytest.approx(ld, rel=1e-9, abs=1e-9)


def test_cli_exp_writes_svgs(tmp_path):
    argv = ["exp", "fermat-ball", "--n-dirs", "16", "--T-grid", "0.1", "--out-dir", str(tmp_path)]
    assert main(argv) == 0
    assert (tmp_path / "fermat_ball.svg").exists()
    assert main(argv[:-2] + ["--no-plots", "--out-dir", str(tmp_path / "np")]) == 0
    assert not (tmp_path / "np" / "fermat_ball.svg").exists()


def test_cli_exp_config_error(tmp_path):
    assert main(["exp", "two-partitions", "--eps", "0.5", "--n", "100", "--out-dir", str(tmp_path)]) == 2
