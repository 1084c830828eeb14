import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsvm.errors import DimensionError
from dsvm.loss import (Classifier, LossConfig, Problem, Shard, feature_map_quadratic,
                       local_cost, local_gradient, local_hessian, smooth_hinge, squared_hinge)

mpmath.mp.dps = 50


def mp_hinge(z, mu):
    z, mu = mpmath.mpf(z), mpmath.mpf(mu)
    val = mpmath.log1p(mpmath.exp(mu * z)) / mu
    e = mpmath.exp(-mu * z)
    return float(val), float(1 / (1 + e)), float(mu * e / (1 + e) ** 2)


def test_hinge_at_zero():
    v, d1, d2 = smooth_hinge(0.0, 3.0)
    assert v == pytest.approx(math.log(2) / 3, abs=1e-15)
    assert d1 == 0.5 and d2 == 0.75


def test_hinge_large_positive():
    v, d1, _ = smooth_hinge(10.0, 3.0)
    assert abs(v - 10.0) < 1e-12 and abs(d1 - 1.0) < 1e-12


def test_hinge_large_negative_against_extended_precision():
    v, d1, d2 = smooth_hinge(-10.0, 3.0)
    ov, od1, od2 = mp_hinge(-10, 3)
    assert v == pytest.approx(ov, rel=1e-14)
    assert d1 == pytest.approx(od1, rel=1e-14)
    assert d2 == pytest.approx(od2, rel=1e-14)
    assert d1 == pytest.approx(9.36e-14, rel=1e-3)


@pytest.mark.parametrize("z", [-400, -50, -11, -3.3, -0.2, 0.0, 1e-9, 0.7, 5, 12, 80, 700])
@pytest.mark.parametrize("mu", [0.5, 3.0, 40.0])
def test_hinge_matches_oracle_everywhere(z, mu):
    got = smooth_hinge(z, mu)
    want = mp_hinge(z, mu)
    for g, w in zip(got, want):
        assert g == pytest.approx(w, rel=1e-13, abs=1e-300)
        assert math.isfinite(g)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(0.05, 100))
def test_hinge_uniform_bound(z, mu):
    v = smooth_hinge(z, mu)[0]
    assert v >= max(z, 0.0) - 1e-12 * max(1.0, abs(z))
    assert v - max(z, 0.0) <= math.log(2) / mu + 1e-12 * max(1.0, abs(z))


def test_hinge_vectorized():
    z = np.linspace(-5, 5, 11)
    v, d1, d2 = smooth_hinge(z, 3.0)
    for i, zi in enumerate(z):
        assert (v[i], d1[i], d2[i]) == pytest.approx(smooth_hinge(float(zi), 3.0))


def test_hinge_rejects_bad_mu():
    with pytest.raises(ValueError):
        smooth_hinge(1.0, 0.0)


def test_squared_hinge():
    assert squared_hinge(2.0) == (4.0, 4.0, 2.0)
    assert squared_hinge(-1.0) == (0.0, 0.0, 0.0)


def test_feature_map():
    np.testing.assert_allclose(feature_map_quadratic([1, 2]), [1, 4, 2 * math.sqrt(2)])
    assert feature_map_quadratic([0, 0]).tolist() == [0, 0, 0]
    with pytest.raises(DimensionError):
        feature_map_quadratic([1, 2, 3])


def test_kernel_identity(rng):
    for _ in range(100):
        a, b = rng.normal(size=2), rng.normal(size=2)
        lhs = feature_map_quadratic(a) @ feature_map_quadratic(b)
        assert lhs == pytest.approx((a @ b) ** 2, abs=1e-12)


def test_classifier_roundtrip():
    c = Classifier(np.array([1.0, -2.0, 0.5]), 0.25)
    back = Classifier.unpack(c.pack())
    assert np.array_equal(back.omega, c.omega) and back.nu == c.nu


CFG = LossConfig(C=1.5, mu=3.0)


def test_empty_shard():
    s = Shard([], [], dim=3)
    x = np.array([1.0, 2.0, -1.0, 4.0])
    assert local_cost(x, s, CFG) == 6.0
    np.testing.assert_array_equal(local_gradient(x, s, CFG), [2, 4, -2, 0])
    np.testing.assert_array_equal(local_hessian(x, s, CFG), np.diag([2, 2, 2, 0.0]))


def test_single_point_cost():
    s = Shard([[0.3, -0.2, 0.1]], [-1])
    assert local_cost(np.zeros(4), s, CFG) == pytest.approx(1.5 * math.log1p(math.exp(3)) / 3)
    assert local_cost(np.zeros(4), s, CFG) == pytest.approx(1.5243, abs=1e-4)


def test_shard_validation():
    with pytest.raises(ValueError):
        Shard([[1.0, 2.0]], [0])
    with pytest.raises(DimensionError):
        Shard([[1.0, 2.0]], [1, -1])
    with pytest.raises(DimensionError):
        local_cost(np.zeros(5), Shard([[1.0, 2.0, 3.0]], [1]), CFG)


def random_shard(rng, count=12):
    pts = feature_map_quadratic(rng.uniform(-1, 1, size=(count, 2)))
    return Shard(pts, rng.choice([-1.0, 1.0], size=count))


def fd_gradient(f, x, eps=1e-5):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = eps
        g[k] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


def test_gradient_and_hessian_finite_differences(rng):
    worst_g = worst_h = 0.0
    for _ in range(100):
        s = random_shard(rng)
        x = rng.normal(scale=1.5, size=4)
        g = local_gradient(x, s, CFG)
        fd = fd_gradient(lambda v: local_cost(v, s, CFG), x)
        worst_g = max(worst_g, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-8))
        H = local_hessian(x, s, CFG)
        fdH = np.column_stack([fd_gradient(lambda v: local_gradient(v, s, CFG)[k], x) for k in range(4)])
        worst_h = max(worst_h, np.linalg.norm(H - fdH) / np.linalg.norm(H))
    assert worst_g <= 1e-6
    assert worst_h <= 1e-5


def test_hessian_structure(rng):
    for _ in range(30):
        s = random_shard(rng)
        H = local_hessian(rng.normal(size=4), s, CFG)
        assert np.array_equal(H, H.T)
        assert np.min(np.linalg.eigvalsh(H)) > 0
        assert np.min(np.linalg.eigvalsh(H[:3, :3])) >= 2 - 1e-12


def test_squared_loss_gradients(rng):
    cfg = LossConfig(kind="squared")
    s = random_shard(rng)
    x = rng.normal(size=4)
    fd = fd_gradient(lambda v: local_cost(v, s, cfg), x)
    np.testing.assert_allclose(local_gradient(x, s, cfg), fd, rtol=1e-6, atol=1e-7)


def test_batched_problem_matches_per_agent(rng):
    shards = tuple(random_shard(rng, count=5 + i) for i in range(4)) + (Shard([], [], dim=3),)
    p = Problem(shards, CFG)
    x = rng.normal(size=(5, 4))
    for i, s in enumerate(shards):
        assert p.costs(x)[i] == pytest.approx(local_cost(x[i], s, CFG), rel=1e-13)
        np.testing.assert_allclose(p.gradients(x)[i], local_gradient(x[i], s, CFG), rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(p.hessians(x)[i], local_hessian(x[i], s, CFG), rtol=1e-12, atol=1e-13)
    with pytest.raises(DimensionError):
        p.cost(np.zeros((4, 4)))


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(C=0)
    with pytest.raises(ValueError):
        LossConfig(kind="hinge")
