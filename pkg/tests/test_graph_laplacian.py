import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermatlap.clustering import fermat_graph
from fermatlap.errors import EmptyGraph, EmptySide, EpsOutOfRange, NegativeArgument, ZeroDegree
from fermatlap.graph_laplacian import (LaplacianSpec, SparseWeightedGraph, bandwidth_rule, build_weights,
                                       degrees, dirichlet_form, kernel_eta, laplacian_dn, laplacian_jqr,
                                       laplacian_matrix, laplacian_ps, ncut, remark_mapping, rw_laplacian,
                                       unit_ball_volume)
from fermatlap.percolation import reference_mu
from fermatlap.sampling import DensityModel, sample_iid


def dense_graph(W):
    W = np.asarray(W, dtype=float)
    n = len(W)
    i, j = np.nonzero(np.triu(W, k=1))
    diag = np.diag(W).copy()
    return SparseWeightedGraph.from_upper(n, i, j, W[i, j], diag if diag.any() else None)


def random_weights(rng, n, density=0.5, loops=True):
    A = rng.uniform(0.1, 1.0, size=(n, n)) * (rng.uniform(size=(n, n)) < density)
    A = np.triu(A, 1)
    A = A + A.T
    # a ring keeps every node connected
    for k in range(n):
        A[k, (k + 1) % n] = A[(k + 1) % n, k] = max(A[k, (k + 1) % n], 0.2)
    if loops:
        A[np.diag_indices(n)] = rng.uniform(0.1, 0.5, size=n)
    return A


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0, rel=1e-15)
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)


def test_kernel_values():
    assert kernel_eta(0.5, 2) == pytest.approx(1 / math.pi)
    assert kernel_eta(1.0, 2) == pytest.approx(1 / math.pi)
    for m in (1, 2, 3):
        assert kernel_eta(1.2, m) == 0.0
    with pytest.raises(NegativeArgument):
        kernel_eta(-0.1, 2)


def test_build_weights_two_points():
    h, n = 0.4, 2
    d = np.array([[0.0, 0.5 * h], [0.5 * h, 0.0]])
    G = build_weights(d, h, n=n, m=2)
    w = 1 / (n * h ** 2 * math.pi)
    assert G.weights[0, 1] == pytest.approx(w, rel=1e-14)
    assert G.weights[0, 0] == pytest.approx(w, rel=1e-14)
    assert G.includes_self_loops
    np.testing.assert_allclose(degrees(G), [2 * w, 2 * w], rtol=1e-14)


def test_build_weights_far_pair_is_empty():
    d = np.array([[0.0, 2.0], [2.0, 0.0]])
    with pytest.raises(EmptyGraph):
        build_weights(d, 1.0, m=2)
    d3 = np.array([[0, 2.0, 0.5], [2.0, 0, 0.5], [0.5, 0.5, 0]])
    G = build_weights(d3, 1.0, m=2)
    assert G.weights[0, 1] == 0.0


def test_degrees_match_dense_recomputation():
    rng = np.random.default_rng(3)
    W = random_weights(rng, 30)
    G = dense_graph(W)
    np.testing.assert_allclose(degrees(G), W.sum(axis=1), rtol=1e-12)
    np.testing.assert_allclose(G.degrees, W.sum(axis=1), rtol=1e-12)
    assert (G.weights != G.weights.T).nnz == 0


def test_isolated_nodes_have_self_loop_degree():
    d = np.full((4, 4), 10.0)
    np.fill_diagonal(d, 0.0)
    d[0, 1] = d[1, 0] = 0.1
    G = build_weights(d, 1.0, n=4, m=1)
    w = 1 / (4 * 1.0 * 2.0)
    np.testing.assert_allclose(degrees(G), [2 * w, 2 * w, w, w], rtol=1e-14)


def test_uniform_degrees_near_one():
    # degree statistics on Fermat weights track rho^p = 1 within an O(h) band away from the boundary
    n = 2000
    cloud = sample_iid(DensityModel.uniform(), n, 0)
    mu = reference_mu(2.0, 2)
    h = bandwidth_rule(n, 2, 0.01, 2.0, 1.0, mu, prefactor=0.5)
    deg = degrees(fermat_graph(cloud, 2.0, h, mu=mu))
    X = cloud.points
    inner = np.all((X > h) & (X < 1 - h), axis=1)
    assert inner.sum() > 500
    assert abs(np.mean(deg[inner]) - 1.0) <= h


def test_unnormalized_is_d_minus_w():
    rng = np.random.default_rng(0)
    W = random_weights(rng, 8)
    L = laplacian_jqr(dense_graph(W), 5.0, 1.0, 3.0).toarray()
    np.testing.assert_allclose(L, np.diag(W.sum(1)) - W, atol=1e-14)


def test_jqr_random_walk_on_three_nodes():
    W = np.array([[0.5, 1.0, 0.2], [1.0, 0.3, 0.7], [0.2, 0.7, 0.1]])
    L = laplacian_jqr(dense_graph(W), 2, 2, 0).toarray()
    d = W.sum(1)
    Wt = W / np.outer(d ** 2, d ** 2)
    dt = Wt.sum(1)
    np.testing.assert_allclose(L, np.eye(3) - Wt / dt[:, None], atol=1e-13)
    np.testing.assert_allclose(L @ np.ones(3), 0, atol=1e-12)


def test_jqr_symmetric_normalized():
    rng = np.random.default_rng(1)
    W = random_weights(rng, 12)
    L = laplacian_jqr(dense_graph(W), 2, 3, 1).toarray()
    assert np.max(np.abs(L - L.T)) < 1e-12 * np.max(np.abs(L))
    d = W.sum(1)
    Wt = W / np.outer(d ** 3, d ** 3)
    dt = Wt.sum(1)
    ref = np.diag(dt ** -0.5) @ (np.diag(dt) - Wt) @ np.diag(dt ** -0.5)
    np.testing.assert_allclose(L, ref, rtol=1e-10, atol=1e-13)


def test_ps_s2_is_plain_random_walk():
    rng = np.random.default_rng(2)
    W = random_weights(rng, 10)
    L = laplacian_ps(dense_graph(W), 2.0).toarray()
    d = W.sum(1)
    np.testing.assert_allclose(L, np.eye(10) - W / d[:, None], atol=1e-14)


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 2.0, 3.5])
def test_ps_two_nodes_closed_form(s):
    W = np.array([[0.3, 0.8], [0.8, 0.6]])
    L = laplacian_ps(dense_graph(W), s).toarray()
    d = W.sum(1)
    Wp = W / np.outer(d ** (1 - s / 2), d ** (1 - s / 2))
    a0 = Wp[0, 1] / Wp[0].sum()
    a1 = Wp[1, 0] / Wp[1].sum()
    np.testing.assert_allclose(L, [[a0, -a0], [-a1, a1]], atol=1e-14)
    assert 0 < a0 <= 1 and 0 < a1 <= 1
    np.testing.assert_allclose(sorted(np.linalg.eigvals(L).real), [0, a0 + a1], atol=1e-14)
    # without self-loops the chain is symmetric: [[a,-a],[-a,a]] with a = 1
    L0 = laplacian_ps(dense_graph(np.array([[0, 0.8], [0.8, 0]])), s).toarray()
    np.testing.assert_allclose(L0, [[1, -1], [-1, 1]], atol=1e-14)


def test_ps_constant_complete_graph_independent_of_s():
    W = np.full((6, 6), 0.7)
    ref = laplacian_ps(dense_graph(W), 2.0).toarray()
    for s in (0.0, 0.7, 1.3, 4.0):
        np.testing.assert_allclose(laplacian_ps(dense_graph(W), s).toarray(), ref, atol=1e-14)


def test_dn_with_j_equal_q_is_ps():
    rng = np.random.default_rng(4)
    W = random_weights(rng, 9)
    G = dense_graph(W)
    for s in (0.5, 2.0, 3.0):
        np.testing.assert_allclose(laplacian_dn(G, s, s).toarray(), laplacian_ps(G, s).toarray(), atol=1e-12)


def test_rw_two_nodes_unit_scale():
    m = 1
    h = math.sqrt(2 * (m + 2))
    L = rw_laplacian(dense_graph(np.array([[0, 0.4], [0.4, 0]])), h, m).toarray()
    np.testing.assert_allclose(L, [[1, -1], [-1, 1]], atol=1e-14)
    np.testing.assert_allclose(sorted(np.linalg.eigvals(L).real), [0, 2], atol=1e-14)


def test_unscaled_rw_spectrum_in_zero_two():
    rng = np.random.default_rng(5)
    for _ in range(20):
        W = random_weights(rng, 15, density=rng.uniform(0.1, 0.9), loops=bool(rng.integers(2)))
        h, m = 0.3, 2
        L = rw_laplacian(dense_graph(W), h, m).toarray() / (2 * (m + 2) / h ** 2)
        d = W.sum(1)
        S = np.diag(d ** 0.5) @ L @ np.diag(d ** -0.5)
        ev = np.linalg.eigvalsh(0.5 * (S + S.T))
        assert ev.min() > -1e-12 and ev.max() < 2 + 1e-12


def test_jqr_220_is_rw_up_to_scale_on_unit_degree_graph():
    # on a regular graph the q-reweighting is a global scalar, so both coincide
    W = np.ones((5, 5)) - np.eye(5)
    G = dense_graph(W)
    h, m = 0.5, 2
    np.testing.assert_allclose(rw_laplacian(G, h, m).toarray() / (2 * (m + 2) / h ** 2),
                               laplacian_jqr(G, 2, 2, 0).toarray(), atol=1e-13)


def test_rw_spec_equals_scaled_fermat_ps_s2():
    rng = np.random.default_rng(6)
    G = dense_graph(random_weights(rng, 10))
    a = laplacian_matrix(LaplacianSpec("rw", 0.2, 2), G).toarray()
    b = laplacian_matrix(LaplacianSpec("fermat_ps", 0.2, 2, s=2.0, scaled=True), G).toarray()
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-10)


@pytest.mark.parametrize("spec", [
    LaplacianSpec("jqr", 1.0, 1, j=1, q=1, r=0),
    LaplacianSpec("jqr", 1.0, 1, j=2, q=2, r=0),
    LaplacianSpec("dn", 1.0, 1, j=2.5, q=3.0),
    LaplacianSpec("fermat_ps", 1.0, 1, s=0.0),
    LaplacianSpec("fermat_ps", 0.3, 2, s=3.0, scaled=True),
    LaplacianSpec("rw", 0.3, 2),
])
def test_constants_are_annihilated(spec):
    rng = np.random.default_rng(8)
    for _ in range(10):
        L = laplacian_matrix(spec, dense_graph(random_weights(rng, 20)))
        scale = abs(L).max()
        assert np.max(np.abs(L @ np.ones(20))) < 1e-10 * max(scale, 1.0)


def test_symmetric_normalized_annihilates_sqrt_degree():
    rng = np.random.default_rng(9)
    W = random_weights(rng, 14)
    L = laplacian_jqr(dense_graph(W), 2, 3, 1).toarray()
    d = W.sum(1)
    dq = (W / np.outer(d ** 3, d ** 3)).sum(1)
    assert np.max(np.abs(L @ np.sqrt(dq))) < 1e-10 * np.abs(L).max() * np.sqrt(dq).max()


@given(st.integers(0, 10_000), st.integers(3, 25))
def test_transition_matrix_row_stochastic(seed, n):
    rng = np.random.default_rng(seed)
    G = dense_graph(random_weights(rng, n))
    P = np.eye(n) - laplacian_ps(G, 2.0).toarray()
    np.testing.assert_allclose(P.sum(1), 1.0, atol=1e-12)
    assert P.min() >= 0


def test_zero_degree_is_an_error():
    W = np.array([[0, 1.0, 0], [1.0, 0, 0], [0, 0, 0]])
    G = dense_graph(W)
    with pytest.raises(ZeroDegree):
        laplacian_ps(G, 2.0)
    with pytest.raises(ZeroDegree):
        rw_laplacian(G, 1.0, 1)


def test_dirichlet_constant_is_zero():
    rng = np.random.default_rng(10)
    G = dense_graph(random_weights(rng, 10))
    v = rng.normal(size=10)
    assert dirichlet_form(G, 0.3, 2, 10, np.full(10, 2.5), v) == pytest.approx(0.0, abs=1e-14)


def test_dirichlet_matches_laplacian_quadratic_form():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(5, 20))
        W = random_weights(rng, n, density=rng.uniform(0.2, 1.0))
        G = dense_graph(W)
        h, m = rng.uniform(0.1, 1.0), int(rng.integers(1, 4))
        u = rng.normal(size=n)
        L = rw_laplacian(G, h, m).toarray()
        mass = W.sum(1)
        rhs = (mass * (L @ u)) @ u / n
        assert dirichlet_form(G, h, m, n, u, u) == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_dirichlet_bilinear_and_matrix_form():
    rng = np.random.default_rng(12)
    n = 10
    G = dense_graph(random_weights(rng, n))
    u, w, v = rng.normal(size=(3, n))
    a, b = 1.7, -0.4
    lhs = dirichlet_form(G, 0.5, 2, n, a * u + b * w, v)
    rhs = a * dirichlet_form(G, 0.5, 2, n, u, v) + b * dirichlet_form(G, 0.5, 2, n, w, v)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    B = dirichlet_form(G, 0.5, 2, n, np.eye(n), np.eye(n))
    assert u @ B @ v == pytest.approx(dirichlet_form(G, 0.5, 2, n, u, v), rel=1e-12)


def test_ncut_examples():
    assert ncut(dense_graph([[0, 1.0], [1.0, 0]]), [1, 0]) == pytest.approx(1.0)
    path = np.array([[0, 1.0, 0], [1.0, 0, 1.0], [0, 1.0, 0]])
    assert ncut(dense_graph(path), [1, 0, 0]) == pytest.approx(1.0)
    # self-loops are excluded from both cut and volume
    looped = path + np.diag([5.0, 5.0, 5.0])
    assert ncut(dense_graph(looped), [1, 0, 0]) == pytest.approx(1.0)
    two = np.zeros((6, 6))
    two[:3, :3] = 1.0
    two[3:, 3:] = 1.0
    np.fill_diagonal(two, 0.0)
    assert ncut(dense_graph(two), [1, 1, 1, 0, 0, 0]) == 0.0
    with pytest.raises(EmptySide):
        ncut(dense_graph(path), [1, 1, 1])


def test_bandwidth_rule_value():
    h = bandwidth_rule(10_000, 2, 0.05, 1.0, 1.0, 1.0)
    assert h == pytest.approx(4 * 5000 ** (-0.5 * (1 / 3 - 0.05)), rel=1e-14)
    assert h == pytest.approx(1.196849, rel=1e-6)


def test_bandwidth_rule_beta_doubling():
    n, m, eps, p, beta, mu = 5000, 2, 0.02, 2.0, 1.3, 1.1
    h1 = bandwidth_rule(n, m, eps, p, beta, mu)
    h2 = bandwidth_rule(n, m, eps, p, 2 * beta, mu)
    assert h2 / h1 == pytest.approx(2 ** ((p - 1) / m) * 2 ** (-(1 / m) * (1 / 3 - eps)), rel=1e-13)


def test_bandwidth_rule_decreasing_in_n_and_eps_range():
    hs = [bandwidth_rule(n, 2, 0.01, 2.0, 1.0, 1.0) for n in (100, 1000, 10_000, 100_000)]
    assert all(a > b for a, b in zip(hs, hs[1:]))
    for eps in (0.0, 1 / 22, 0.2, -0.01):
        with pytest.raises(EpsOutOfRange):
            bandwidth_rule(1000, 2, eps, 2.0, 1.0, 1.0)


def test_remark_mapping():
    j, q, r = remark_mapping(2.0, 2.0, 2)
    assert (j, q, r) == (3.0, 4.0, 0.0)
    assert remark_mapping(1.0, 0.0, 1) == (0.0, 0.0, 0.0)


def test_triplet_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    G = dense_graph(random_weights(rng, 12))
    path = tmp_path / "w.csv"
    G.to_triplet_csv(path, mode="fermat_ps")
    back = SparseWeightedGraph.from_triplet_csv(path)
    assert abs(back.weights - G.weights).max() == 0.0
    assert back.meta["mode"] == "fermat_ps"
