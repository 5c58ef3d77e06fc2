"""End-to-end acceptance criteria. Each test carries an `acceptance` marker; the run
summary prints one PASS/FAIL line per criterion (see conftest.py)."""
import math
import os
import time

import numpy as np
import pytest
import scipy.linalg as sla

from fermatlap.clustering import fermat_graph, spectral_cluster_dn, spectral_cluster_fd
from fermatlap.config import ExperimentConfig
from fermatlap.experiments import crossings, golden_files, run
from fermatlap.fermat import FermatParams, fermat_pairwise, floyd_warshall
from fermatlap.geometry import LocalDensityJet, fermat_ball, geodesic_taylor, integrate_geodesic
from fermatlap.graph_laplacian import (LaplacianSpec, SparseWeightedGraph, bandwidth_rule, degrees,
                                       dirichlet_form, laplacian_factors, laplacian_matrix, rw_laplacian)
from fermatlap.percolation import estimate_mu, reference_mu
from fermatlap.sampling import DensityModel, PointCloud, sample_iid
from fermatlap.spectral import SpectralDecomposition, diffusion_evolve, eig_smallest, eigvec_discrepancy_check

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")
DEGREE_C = 2.0  # frozen from the pilot recorded alongside the degree-statistics criterion


def detail(record_property, text):
    record_property("detail", text)


@pytest.fixture(scope="session")
def default_runs(tmp_path_factory):
    """Runs each experiment at its defaults once per session, on demand."""
    cache = {}

    def get(exp):
        if exp not in cache:
            out = tmp_path_factory.mktemp(exp)
            t0 = time.perf_counter()
            result = run(ExperimentConfig(exp, seed=0, out_dir=str(out)))
            cache[exp] = (str(out), result, time.perf_counter() - t0)
        return cache[exp]

    return get


def dense_graph(W):
    i, j = np.nonzero(np.triu(W, k=1))
    diag = np.diag(W).copy()
    return SparseWeightedGraph.from_upper(len(W), i, j, W[i, j], diag if diag.any() else None)


def random_weights(rng, n):
    A = rng.uniform(0.1, 1.0, size=(n, n)) * (rng.uniform(size=(n, n)) < rng.uniform(0.2, 0.9))
    A = np.triu(A, 1)
    A = A + A.T
    for k in range(n):
        A[k, (k + 1) % n] = A[(k + 1) % n, k] = max(A[k, (k + 1) % n], 0.2)
    A[np.diag_indices(n)] = rng.uniform(0.0, 0.3, size=n)
    return A


@pytest.mark.acceptance(1, "exact Fermat distances equal Floyd-Warshall")
def test_c01_oracle_equivalence(record_property):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for c in range(50):
        n = int(rng.integers(5, 301))
        X = rng.uniform(size=(n, 2))
        p = (1.0, 1.5, 2.0, 3.0)[c % 4]
        D = fermat_pairwise(X, FermatParams(p, 2)).values
        worst = max(worst, float(np.max(np.abs(D - floyd_warshall(X, p)))))
    secs = time.perf_counter() - t0
    detail(record_property, f"max |diff| {worst:.2e}, {secs:.1f} s")
    assert worst < 1e-12
    assert secs < 60


@pytest.mark.acceptance(2, "p = 1 reduces to Euclidean distance and Euclidean random-walk clustering")
def test_c02_p1_degeneracy(record_property):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(20):
        X = rng.uniform(size=(int(rng.integers(10, 200)), 2))
        D = fermat_pairwise(X, FermatParams(1.0, 2)).values
        E = np.linalg.norm(X[:, None] - X[None], axis=2)
        worst = max(worst, float(np.max(np.abs(D - E))))
    assert worst < 1e-12
    agree = 0
    for seed in range(3):
        cloud = sample_iid(DensityModel.disk_valley(0.25), 500, seed)
        h = bandwidth_rule(500, 2, 0.01, 1.0, 1.0, 1.0, prefactor=1.0)
        a = spectral_cluster_fd(cloud, 1.0, 2.0, h, 3, 2, seed)
        b = spectral_cluster_dn(cloud, 2.0, 2.0, h, 3, 2, seed)
        assert np.array_equal(a.labels, b.labels)
        agree += 1
    detail(record_property, f"max |diff| {worst:.2e}; labels identical on {agree}/3 clouds")


@pytest.mark.acceptance(3, "metric axioms: triangle inequality and insertion monotonicity")
def test_c03_metric_axioms(record_property):
    rng = np.random.default_rng(103)
    X = rng.uniform(size=(200, 2))
    worst = -np.inf
    for p in (1.0, 1.5, 2.0, 3.0):
        R = fermat_pairwise(X, FermatParams(p, 2)).values ** (1 / p)
        i, j, k = rng.integers(0, 200, size=(3, 10_000))
        worst = max(worst, float(np.max(R[i, k] - R[i, j] - R[j, k])))
    assert worst <= 1e-9
    for p in (1.5, 2.0, 3.0):
        pts = rng.uniform(size=(20, 2))
        prev = fermat_pairwise(pts, FermatParams(p, 2)).values
        for _ in range(100):
            pts = np.vstack([pts, rng.uniform(size=(1, 2))])
            cur = fermat_pairwise(pts, FermatParams(p, 2)).values
            assert np.all(cur[:-1, :-1] <= prev)
            prev = cur
    detail(record_property, f"max triangle excess {worst:.2e}")


@pytest.mark.acceptance(4, "geodesic Taylor remainder is fourth order")
def test_c04_geodesic_order(record_property):
    t0 = time.perf_counter()
    model = DensityModel.linear((1.0, 0.0))
    x0 = np.zeros(2)
    jet = LocalDensityJet.from_model(model, x0)
    worst = 0.0
    for ang in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        b = np.array([math.cos(ang), math.sin(ang)])
        ratios = []
        for t in (0.05, 0.1, 0.2):
            ode = integrate_geodesic(model, x0, b, 3.0, t, 1e-4).positions[-1]
            ratios.append(np.linalg.norm(geodesic_taylor(jet, b, t, 3.0, 2) - ode) / t ** 4)
        worst = max(worst, max(ratios) / ratios[0])
    secs = time.perf_counter() - t0
    detail(record_property, f"max ratio to t=0.05 value {worst:.3f}, {secs:.1f} s")
    assert worst <= 2.0
    assert secs < 5


@pytest.mark.acceptance(5, "Fermat ball anisotropy; constant-density ball is round")
def test_c05_ball_anisotropy(record_property):
    ball = fermat_ball(DensityModel.linear((1.0, 0.0)), np.zeros(2), 0.15, 128, 3.0, 1e-3)
    plus, minus = ball.vertices[:, 0].max(), -ball.vertices[:, 0].min()
    assert plus > minus
    flat = DensityModel.uniform(lo=(-1, -1), hi=(1, 1))
    rho0 = float(flat(np.zeros(2)))
    rb = fermat_ball(flat, np.zeros(2), 0.3, 128, 3.0, 1e-2)
    dev = float(np.max(np.abs(np.linalg.norm(rb.vertices, axis=1) - rho0 * 0.3)))
    assert dev < 1e-8
    detail(record_property, f"+x1 {plus:.4f} > -x1 {minus:.4f}; roundness {dev:.1e}")


SPECS = [
    LaplacianSpec("rw", 0.4, 2),
    LaplacianSpec("fermat_ps", 0.4, 2, s=0.0, scaled=True),
    LaplacianSpec("fermat_ps", 0.4, 2, s=1.0, scaled=True),
    LaplacianSpec("fermat_ps", 0.4, 2, s=3.0),
    LaplacianSpec("dn", 0.4, 2, j=2.2, q=2.7),
    LaplacianSpec("jqr", 0.4, 2, j=2, q=2, r=0),
    LaplacianSpec("jqr", 0.4, 2, j=1, q=1, r=0),
]


@pytest.mark.acceptance(6, "spectral identities: Dirichlet form, pencil oracle, L 1 = 0")
def test_c06_spectral_identities(record_property):
    rng = np.random.default_rng(106)
    form_err = eig_err = null_err = stoch_err = 0.0
    for g in range(50):
        n = int(rng.integers(4, 65))
        W = random_weights(rng, n)
        G = dense_graph(W)
        h, m = rng.uniform(0.1, 1.0), int(rng.integers(1, 4))
        u = rng.normal(size=n)
        L = rw_laplacian(G, h, m).toarray()
        ref = (W.sum(1) * (L @ u)) @ u / n
        form_err = max(form_err, abs(dirichlet_form(G, h, m, n, u, u) - ref) / max(abs(ref), 1e-300))
        for spec in SPECS:
            Lm = laplacian_matrix(spec, G).toarray()
            null_err = max(null_err, float(np.max(np.abs(Lm @ np.ones(n)))) / max(1.0, np.abs(Lm).max()))
            A, s1, s2, c = laplacian_factors(spec, G)
            # generalized symmetric pencil (A, diag(1/(s1 s2))) in the variable S2 v
            lam_ref = c * sla.eigh(A.toarray(), np.diag(1.0 / (s1 * s2)), eigvals_only=True)
            K = min(n, 10)
            method = ("ql", "lapack", "sparse")[g % 3] if n > K + 1 else "ql"
            dec = eig_smallest(spec, G, K, method=method)
            eig_err = max(eig_err, float(np.max(np.abs(dec.eigenvalues - lam_ref[:K]))) / max(1.0, lam_ref.max()))
        P = np.eye(n) - laplacian_matrix(LaplacianSpec("fermat_ps", 1.0, 1, s=2.0), G).toarray()
        stoch_err = max(stoch_err, float(np.max(np.abs(P.sum(1) - 1))))
    detail(record_property, f"form {form_err:.1e}, eig {eig_err:.1e}, L1 {null_err:.1e}, rows {stoch_err:.1e}")
    assert form_err < 1e-10
    assert eig_err < 1e-8
    assert null_err < 1e-10
    assert stoch_err < 1e-10


@pytest.mark.acceptance(7, "circle convergence: lambda_2 error decreases, < 15% at n = 4000")
def test_c07_circle_convergence(record_property, tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("circle_convergence", out_dir=str(tmp_path),
                           params={"amplitude": 0.0, "p_grid": (1.0,), "smoke_p": 0.0})
    res = run(cfg)
    secs = time.perf_counter() - t0
    errs = [row[3] for row in res["summary"]]
    ref2 = res["reference"][1][2]
    detail(record_property, "median errors " + ", ".join(f"{e:.3%}" for e in errs) + f"; {secs:.0f} s")
    assert ref2 == pytest.approx((2 * math.pi) ** 2, rel=1e-3)
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.15
    assert secs < 300


@pytest.mark.acceptance(8, "Fermat vs mapped Euclidean Laplacian spectra")
def test_c08_family_equivalence_p1(record_property, tmp_path):
    cfg = ExperimentConfig("eig_convergence", out_dir=str(tmp_path), params={"p": 1.0})
    res = run(cfg)
    worst = max(abs(lf - ld) / max(abs(ld), 1e-9) for _, _, _, lf, ld, _ in res["rows"])
    detail(record_property, f"p=1 max relative difference {worst:.1e}")
    assert worst < 1e-8


@pytest.mark.acceptance(8, "Fermat vs mapped Euclidean Laplacian spectra")
def test_c08_family_gap_decreases(record_property, default_runs):
    _, res, _ = default_runs("eig_convergence")
    gaps = {n: g for n, _, g in res["summary"]}
    detail(record_property, "p=1.2 median gaps " + ", ".join(f"n={n}: {g:.2%}" for n, g in gaps.items()))
    assert gaps[4000] < gaps[500]


@pytest.mark.acceptance(9, "two-partition transition from geometric to density cut")
def test_c09_two_partitions(record_property, default_runs):
    out, res, secs = default_runs("two_partitions")
    rows = res["rows"]
    by_p = {r[0]: r for r in rows}
    detail(record_property, f"density acc p=1 {by_p[1.0][3]:.3f}, p=4 {by_p[4.0][3]:.3f}, "
                            f"{crossings(rows)} crossing(s), {secs:.0f} s")
    assert by_p[1.0][3] <= 0.6
    assert by_p[4.0][3] >= 0.9
    assert crossings(rows) == 1
    assert secs < 600
    gold = os.path.join(GOLDEN, "two_partitions")
    for name in golden_files(gold):
        with open(os.path.join(out, name), "rb") as a, open(os.path.join(gold, name), "rb") as b:
            assert a.read() == b.read(), name


@pytest.mark.acceptance(10, "time-constant estimator: exact at p = 1, stable at p = 2")
def test_c10_mu_estimator(record_property):
    one = estimate_mu(1.0, 2, 1.0, 2000.0, 20, seed=7)
    assert np.all(one.values == 1.0)
    a = estimate_mu(2.0, 2, 1.0, 2000.0, 200, seed=11)
    b = estimate_mu(2.0, 2, 1.0, 4000.0, 200, seed=12)
    comb = math.hypot(a.stderr, b.stderr)
    detail(record_property, f"mu(2000) {a.mean:.4f}+-{a.stderr:.4f}, mu(4000) {b.mean:.4f}+-{b.stderr:.4f}")
    assert abs(a.mean - b.mean) < 3 * comb
    assert a.stderr < 0.02 * a.mean and b.stderr < 0.02 * b.mean


@pytest.mark.acceptance(11, "eigenvector perturbation bound survives a falsification sweep")
def test_c11_perturbation_bound(record_property):
    rng = np.random.default_rng(111)
    n = 20
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    B1 = (Q * np.linspace(0.3, 6.0, n)) @ Q.T
    ev1, V1 = np.linalg.eigh(B1)
    dec1 = SpectralDecomposition(ev1, V1 * math.sqrt(n), np.ones(n), np.zeros(n))
    same = eigvec_discrepancy_check(dec1, dec1, 4, 0.05, 0.1, 0.2, 0.6)
    assert same["lhs"] == 0.0
    S = sla.sqrtm(B1).real
    audited = held = 0
    for _ in range(100):
        E = rng.normal(size=(n, n))
        E = 0.5 * (E + E.T)
        delta = rng.uniform(0.005, 0.1)
        E *= rng.uniform(0.5, 1.0) * delta / np.abs(np.linalg.eigvalsh(E)).max()
        B2 = S @ (np.eye(n) + E) @ S
        ev2, V2 = np.linalg.eigh(0.5 * (B2 + B2.T))
        dec2 = SpectralDecomposition(ev2, V2 * math.sqrt(n), np.ones(n), np.zeros(n))
        k = int(rng.integers(0, n))
        alpha = rng.uniform(0.01, 0.2)
        beta = rng.uniform(alpha, 0.5)
        gamma = rng.uniform(beta, 1.0)
        try:
            out = eigvec_discrepancy_check(dec1, dec2, k, delta, alpha, beta, gamma, audit_samples=1000)
        except Exception as exc:  # audit or gap condition not met: trial is not evidence either way
            if type(exc).__name__ != "HypothesisViolated":
                raise
            continue
        audited += 1
        held += out["holds"]
    detail(record_property, f"holds in {held}/{audited} audited trials")
    assert audited > 0
    assert held == audited


@pytest.mark.acceptance(12, "degree statistics within C h of rho^p, shrinking with n")
def test_c12_degree_statistics(record_property):
    mu = reference_mu(2.0, 2)
    med = {}
    for n in (1000, 4000):
        h = bandwidth_rule(n, 2, 0.01, 2.0, 1.0, mu, prefactor=0.5)
        vals = []
        for draw in range(10):
            cloud = sample_iid(DensityModel.uniform(), n, 500 + draw)
            r = float(np.median(np.abs(degrees(fermat_graph(cloud, 2.0, h, mu=mu)) - 1.0)))
            vals.append(r)
            if n == 4000:
                assert r < DEGREE_C * h
        med[n] = (float(np.median(vals)), h)
    detail(record_property, ", ".join(f"n={n}: {r:.3f} (h={h:.3f})" for n, (r, h) in med.items())
           + f", C={DEGREE_C}")
    assert med[4000][0] < med[1000][0]


@pytest.mark.acceptance(13, "diffusion conserves total mass")
def test_c13_conservation(record_property):
    rng = np.random.default_rng(113)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 40))
        R = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < 0.5)
        np.fill_diagonal(R, 0.0)
        L = np.diag(R.sum(1)) - R
        u0 = rng.uniform(size=n)
        dt = 0.9 / max(np.abs(np.diag(L)).max(), 1e-12)
        worst = max(worst, abs(diffusion_evolve(L, u0, 1.0, dt).sum() - u0.sum()))
    detail(record_property, f"max |sum drift| {worst:.1e}")
    assert worst < 1e-8


@pytest.mark.acceptance(14, "experiments reproduce golden CSVs bit-for-bit")
@pytest.mark.parametrize("exp", ["two_partitions", "eig_convergence", "circle_convergence", "fermat_ball"])
def test_c14_goldens(record_property, default_runs, exp):
    out, _, secs = default_runs(exp)
    gold = os.path.join(GOLDEN, exp)
    names = golden_files(gold)
    assert names == golden_files(out)
    diff = []
    for name in names:
        with open(os.path.join(out, name), "rb") as a, open(os.path.join(gold, name), "rb") as b:
            if a.read() != b.read():
                diff.append(name)
    detail(record_property, f"{exp}: {len(names) - len(diff)}/{len(names)} files match")
    assert not diff, diff
