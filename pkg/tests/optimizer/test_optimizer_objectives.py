"""
Tests for the local objectives: least squares and the sigmoid network.
"""

import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

import numpy as np
import pytest

from qpush.exceptions import ConfigInvalid, DimensionMismatch, EmptyDataset
from qpush.objectives import (
    build_objectives,
    estimate_smoothness,
    global_gradient,
    global_loss,
    global_optimum,
    least_squares_objective,
    lsq_data,
    nonconvex_objective,
    sigmoid,
)
from qpush.utils.seeding import SeedStreams


def test_constant_dataset():
    c = np.array([1.5, -2.0, 0.25])
    obj = least_squares_objective(np.tile(c, (4, 1)))
    assert np.array_equal(obj.optimum, c)
    assert obj.loss(c) == 0.0
    assert np.all(obj.full_gradient(c) == 0.0)
    assert np.all(obj.sample_gradient(c, np.random.default_rng(0)) == 0.0)
    assert obj.constants().sigma_sq == 0.0


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        least_squares_objective(np.zeros((0, 3)))


def test_least_squares_loss_and_gradient():
    data = np.array([[0.0, 0.0], [2.0, 4.0]])
    obj = least_squares_objective(data, curvature=2.0)
    x = np.array([1.0, 1.0])
    # (h / 2m) sum ||x - zeta||^2 = (2 / 4) * (2 + 10)
    assert obj.loss(x) == pytest.approx(6.0)
    assert np.allclose(obj.full_gradient(x), [0.0, -2.0])
    assert obj.constants().L == 2.0
    assert obj.sample_variance == pytest.approx(4.0 * 5.0)


def test_least_squares_d_sq_covers_given_points():
    obj = least_squares_objective(np.array([[0.0]]))
    assert obj.constants().d_sq == 0.0
    assert obj.constants([np.array([5.0])]).d_sq == pytest.approx(25.0)
    assert obj.constants([np.array([5.0]), np.array([-7.0])]).d_sq == pytest.approx(49.0)


def test_sample_gradient_is_unbiased():
    rng = np.random.default_rng(1)
    obj = least_squares_objective(rng.standard_normal((10, 3)), batch_size=2)
    x = np.ones(3)
    draws = np.array([obj.sample_gradient(x, rng) for _ in range(20_000)])
    assert np.allclose(draws.mean(axis=0), obj.full_gradient(x), atol=0.05)
    assert obj.empirical_variance(x, rng, draws=5000) == pytest.approx(obj.sample_variance, rel=0.1)


def test_global_optimum_recovers_center():
    rng = np.random.default_rng(2)
    center, data = lsq_data(10, 10, 256, rng)
    objectives = [least_squares_objective(local) for local in data]
    x_star = global_optimum(objectives)
    assert np.max(np.abs(x_star - center)) <= 0.5
    assert np.allclose(global_gradient(objectives, x_star), 0.0, atol=1e-9)


def test_weighted_optimum_with_heterogeneous_curvature():
    objectives = [
        least_squares_objective(np.array([[0.0]]), curvature=3.0),
        least_squares_objective(np.array([[4.0]]), curvature=1.0),
    ]
    assert global_optimum(objectives).tolist() == [1.0]
    assert global_loss(objectives, np.array([1.0])) == pytest.approx((1.5 + 4.5) / 2)


def test_mlp_constant_forward_pass():
    inputs = np.zeros((3, 2))
    targets = np.ones((3, 2))
    obj = nonconvex_objective((inputs, targets), hidden_units=4)
    assert obj.dim == 4 * 2 + 4 + 2 * 4 + 2
    x = np.zeros(obj.dim)
    # outputs are 0, so the loss is 0.5 * ||0 - 1||^2 = 1 per sample
    assert obj.loss(x) == pytest.approx(1.0)
    W1, b1, W2, b2 = obj.unpack(obj.full_gradient(x))
    assert np.allclose(W2, -sigmoid(np.zeros(1))[0])
    assert np.allclose(b2, -1.0)
    assert np.allclose(W1, 0.0) and np.allclose(b1, 0.0)


def test_mlp_single_unit_chain_rule():
    u, y = 0.7, 0.2
    obj = nonconvex_objective((np.array([[u]]), np.array([[y]])), hidden_units=1)
    w1, b1, w2, b2 = 0.3, -0.1, 1.5, 0.05
    x = np.array([w1, b1, w2, b2])
    a = w1 * u + b1
    h = 1.0 / (1.0 + np.exp(-a))
    err = w2 * h + b2 - y
    expected = [err * w2 * h * (1 - h) * u, err * w2 * h * (1 - h), err * h, err]
    assert np.allclose(obj.full_gradient(x), expected, atol=1e-14)
    assert obj.loss(x) == pytest.approx(0.5 * err ** 2)


def test_mlp_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    obj = nonconvex_objective((rng.standard_normal((5, 3)), rng.standard_normal((5, 2))), hidden_units=4)
    step = 1e-5
    for _ in range(10):
        x = rng.standard_normal(obj.dim)
        numeric = np.array([
            (obj.loss(x + step * e) - obj.loss(x - step * e)) / (2 * step)
            for e in np.eye(obj.dim)
        ])
        analytic = obj.full_gradient(x)
        assert np.linalg.norm(numeric - analytic) <= 1e-6 * np.linalg.norm(analytic)


def test_mlp_reference_offset():
    rng = np.random.default_rng(4)
    data = (rng.standard_normal((6, 2)), rng.standard_normal((6, 3)))
    plain = nonconvex_objective(data, hidden_units=3)
    ref = rng.standard_normal(plain.dim)
    shifted = nonconvex_objective(data, hidden_units=3, reference=ref)
    assert shifted.loss(np.zeros(plain.dim)) == pytest.approx(plain.loss(ref))
    with pytest.raises(DimensionMismatch):
        nonconvex_objective(data, hidden_units=3, reference=np.zeros(2))


def test_smoothness_estimate_of_least_squares():
    objectives = [least_squares_objective(np.zeros((1, 4)), curvature=h) for h in (1.0, 3.0)]
    assert estimate_smoothness(objectives, np.random.default_rng(0)) == pytest.approx(2.0, rel=1e-6)


def test_presets():
    streams = SeedStreams(1)
    lsq = build_objectives("lsq:10x10:32", 10, streams)
    assert len(lsq) == 10 and lsq[0].dim == 32 and lsq[0].m == 10
    with pytest.raises(ConfigInvalid):
        build_objectives("lsq:5x10:32", 10, streams)

    mlp = build_objectives("mlp:4:6", 3, streams)
    assert len(mlp) == 3
    assert mlp[0].dim == 4 * 6 + 4 + 3 * 4 + 3
    constants = mlp[0].constants()
    assert constants.estimated
    assert constants.L > 0 and constants.sigma_sq > 0
    # every node shares the seeded reference point
    assert np.array_equal(mlp[0].reference, mlp[2].reference)
