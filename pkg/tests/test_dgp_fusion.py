import numpy as np
import pytest

from dgp_pursuit.dgp_fusion import (
    aggregate_norms,
    fuse,
    fuse_arrays,
    fuse_neighbourhoods,
    fused_error_radius,
)
from dgp_pursuit.gp_expert import BoundReport, Prediction


def test_single_member_identity():
    p = Prediction(np.array([1.0, -2.0, 0.3, 4.0]), np.array([0.1, 0.2, 0.3, 0.4]))
    f = fuse([p])
    assert np.array_equal(f.mu, p.mu) and np.array_equal(f.var, p.var)
    assert np.array_equal(f.weights, np.ones((1, 4)))


def test_equal_variance_pair():
    f = fuse([Prediction(np.ones(4), np.ones(4)), Prediction(np.full(4, 3.0), np.ones(4))])
    assert np.allclose(f.mu, 2.0) and np.allclose(f.var, 0.5)


def test_unequal_pair_scalar_oracle():
    f = fuse([Prediction(np.zeros(4), np.full(4, 0.1)), Prediction(np.full(4, 10.0), np.full(4, 10.0))])
    var = 1.0 / (1.0 / 0.1 + 1.0 / 10.0)
    assert np.allclose(f.var, var, atol=1e-15)
    assert np.allclose(f.mu, var * (0.0 / 0.1 + 10.0 / 10.0), atol=1e-15)
    assert f.mu[0] == pytest.approx(0.0990099, abs=1e-7)


def test_empty_member_list():
    with pytest.raises(ValueError):
        fuse([])
    with pytest.raises(ValueError):
        fuse_arrays(np.zeros((0, 4)), np.zeros((0, 4)))


def test_invariants_on_random_instances(rng):
    for _ in range(1000):
        K = int(rng.integers(1, 8))
        mu = rng.normal(size=(K, 4))
        var = rng.uniform(1e-6, 5.0, size=(K, 4))
        m, v, w = fuse_arrays(mu, var)
        assert np.abs(w.sum(0) - 1).max() <= 1e-12
        assert np.all((w >= 0) & (w <= 1))
        if K > 1:
            assert np.abs(1 / v - (1 / var).sum(0)).max() <= 1e-12 * (1 / v).max()
        assert np.all(v <= var.min(0) * (1 + 1e-12))
        assert np.all(m >= mu.min(0) - 1e-12) and np.all(m <= mu.max(0) + 1e-12)
        perm = rng.permutation(K)
        m2, v2, _ = fuse_arrays(mu[perm], var[perm])
        assert np.allclose(m, m2, atol=1e-12, rtol=0) and np.allclose(v, v2, atol=1e-12, rtol=0)


def test_duplicate_and_identical_members(rng):
    for _ in range(100):
        mu, var = rng.normal(size=4), rng.uniform(0.01, 3, 4)
        m, v, _ = fuse_arrays(np.stack([mu, mu]), np.stack([var, var]))
        assert np.abs(v - var / 2).max() <= 1e-12 and np.abs(m - mu).max() <= 1e-12
        N = int(rng.integers(2, 10))
        m, v, _ = fuse_arrays(np.tile(mu, (N, 1)), np.tile(var, (N, 1)))
        assert np.allclose(v, var / N, rtol=1e-12) and np.allclose(m, mu, atol=1e-12)


def test_variance_floor_prevents_infinite_precision():
    m, v, w = fuse_arrays(np.array([[1.0] * 4, [2.0] * 4]), np.array([[0.0] * 4, [1.0] * 4]))
    assert np.all(np.isfinite(m)) and np.all(v > 0)
    assert np.allclose(m, 1.0, atol=1e-9)


def test_neighbourhood_fusion_matches_per_drone(rng):
    n = 5
    mu = rng.normal(size=(n, 4))
    var = rng.uniform(0.01, 2, (n, 4))
    mask = np.eye(n)
    mask[0, 1] = mask[1, 0] = mask[1, 2] = mask[2, 1] = mask[0, 3] = mask[3, 0] = 1
    m, v = fuse_neighbourhoods(mu, var, mask)
    for i in range(n):
        members = np.flatnonzero(mask[i])
        mi, vi, _ = fuse_arrays(mu[members], var[members])
        assert np.allclose(m[i], mi, atol=1e-13) and np.allclose(v[i], vi, atol=1e-13)
    # drone 4 has only itself: bitwise pass-through
    assert np.array_equal(m[4], mu[4]) and np.array_equal(v[4], var[4])


def _report(delta_bar, l_mu):
    z = np.zeros(4)
    return BoundReport(z, z, np.asarray(delta_bar, float), np.asarray(l_mu, float))


def test_fused_radius_examples():
    r1 = _report([0.1, 0.2, 0.3, 0.4], [1, 1, 1, 1])
    r2 = _report([0.5, 0.1, 0.1, 0.1], [2, 0, 0, 0])
    x = np.zeros(4)
    assert np.allclose(fused_error_radius([r1], [x], x), r1.delta_bar)
    assert np.allclose(fused_error_radius([r1, r2], [x, x], x), [0.5, 0.2, 0.3, 0.4])
    y = np.array([3.0, 4.0, 0.0, 0.0])
    assert np.allclose(fused_error_radius([r1, r2], [x, y], x), [0.5 + 2 * 5, 0.2 + 5, 0.3 + 5, 0.4 + 5])
    with pytest.raises(ValueError):
        fused_error_radius([], [], x)


def test_aggregate_norms():
    assert aggregate_norms([0, 0, 0, 0], [0, 0, 0, 0]) == (0.0, 0.0)
    assert aggregate_norms([3, 0, 4, 0], [0, 5, 0, 12]) == (5.0, 13.0)
