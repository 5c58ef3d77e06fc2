import math

import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra

from fermatlap.errors import ConfigError
from fermatlap.percolation import MU_TABLE, _passage, estimate_mu, reference_mu, replicate_value


def dense_passage(X, p):
    D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1)) ** p
    return dijkstra(D, indices=0)[1]


@pytest.mark.parametrize("m", [1, 2, 3])
def test_p1_every_replicate_is_one(m):
    est = estimate_mu(1.0, m, 1.0, 400.0, 5, seed=3)
    assert np.all(est.values == 1.0)
    assert est.mean == 1.0 and est.stderr == 0.0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_passage_matches_dense_dijkstra(p):
    rng = np.random.default_rng(int(p * 10))
    for n in (3, 50, 400):
        X = rng.uniform(-0.5, 1.5, size=(n, 2))
        X[0], X[1] = (0, 0), (1, 0)
        assert _passage(X, p) == pytest.approx(dense_passage(X, p), rel=1e-12)


def test_passage_sparse_cloud_uses_bound():
    # few points: the k-NN graph may not join the endpoints, the direct hop bounds the search
    rng = np.random.default_rng(1)
    X = np.vstack([[0, 0], [1, 0], rng.uniform(3, 4, size=(20, 2))])
    assert _passage(X, 2.0) == pytest.approx(dense_passage(X, 2.0), rel=1e-12)


def test_stderr_formula_and_determinism():
    a = estimate_mu(2.0, 2, 1.0, 300.0, 8, seed=5)
    b = estimate_mu(2.0, 2, 1.0, 300.0, 8, seed=5)
    assert np.array_equal(a.values, b.values)
    assert a.stderr == pytest.approx(np.std(a.values, ddof=1) / math.sqrt(8), rel=1e-14)
    assert a.mean == pytest.approx(a.values.mean(), rel=1e-14)
    v, _ = replicate_value(2.0, 2, 1.0, 300.0, 5, 3)
    assert v == a.values[3]


def test_one_dimensional_constant_is_gamma():
    # on a line the optimal path visits every point; exponential gaps give Gamma(p + 1)
    est = estimate_mu(2.0, 1, 1.0, 2000.0, 100, seed=0)
    assert est.mean == pytest.approx(math.gamma(3.0), abs=4 * est.stderr + 0.02)
    assert reference_mu(2.0, 1) == pytest.approx(2.0)
    assert reference_mu(3.0, 1) == pytest.approx(6.0)


def test_reference_table():
    assert reference_mu(1.0, 2) == 1.0
    for (p, m), (mean, se) in MU_TABLE.items():
        assert reference_mu(p, m) == mean
        assert se < 0.02 * mean
    with pytest.raises(ConfigError):
        reference_mu(1.7, 2)


def test_invalid_arguments():
    with pytest.raises(ConfigError):
        estimate_mu(0.5, 2)
    with pytest.raises(ConfigError):
        estimate_mu(2.0, 2, r=-1.0)
    with pytest.raises(ConfigError):
        estimate_mu(2.0, 2, replicates=1)
    with pytest.raises(ConfigError):
        estimate_mu(2.0, 2, intensity=10.0)


def test_csv(tmp_path):
    est = estimate_mu(2.0, 2, 1.0, 300.0, 4, seed=1)
    est.to_csv(tmp_path / "mu.csv")
    vals = np.loadtxt(tmp_path / "mu.csv", delimiter=",", skiprows=1, comments="#")
    np.testing.assert_array_equal(vals[:, 1], est.values)
