"""Tests classes and functions in perfedavg_simulator/objective/batch_oracles.py"""

import numpy as np
import pytest

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.kernel.rng import RngStream
from perfedavg_simulator.objective import batch_oracles
from perfedavg_simulator.objective.quadratic import CubicRegularizedTask, QuadraticTask

A = np.diag([3.0, 1.0, 0.5])
b = np.array([0.5, 0.0, -1.0])


def test_batch_estimators_delegate_to_model():
    task = QuadraticTask(A, b, grad_noise_std=0.1, hess_noise_std=0.1)
    batch = task.draw_batch(5, np.random.default_rng(0))
    w, v = np.ones(3), np.array([1.0, 0.0, 0.0])
    assert np.array_equal(batch_oracles.batch_grad(task, w, batch), task.batch_grad(batch, w))
    assert np.array_equal(batch_oracles.batch_hvp(task, w, v, batch), task.batch_hvp(batch, w, v))


def test_rejects_missing_batch():
    with pytest.raises(InvalidArgumentError):
        batch_oracles.batch_grad(QuadraticTask(A, b), np.zeros(3), None)


class TestPointGenerators:
    def test_unit_vectors(self):
        vectors = batch_oracles.random_unit_vectors(50, 4, np.random.default_rng(1))
        assert vectors.shape == (50, 4)
        assert np.allclose(np.linalg.norm(vectors, axis=1), 1.0)

    def test_ball_points(self):
        points = batch_oracles.ball_points(500, 3, 2.5, np.random.default_rng(2))
        norms = np.linalg.norm(points, axis=1)
        assert points.shape == (500, 3)
        assert np.all(norms <= 2.5 + 1e-12)
        # a uniform draw puts 1/8 of the mass inside half the radius in three dimensions
        assert np.mean(norms <= 1.25) == pytest.approx(0.125, abs=0.05)


class TestEstimates:
    def test_hessian_norm(self):
        estimate = batch_oracles.hessian_norm_estimate(
            QuadraticTask(A, b), np.zeros(3), np.random.default_rng(3)
        )
        assert estimate == pytest.approx(3.0, rel=1e-6)

    def test_hessian_norm_of_zero_matrix(self):
        task = QuadraticTask(np.zeros((2, 2)), [1.0, 1.0])
        assert batch_oracles.hessian_norm_estimate(task, np.zeros(2), np.random.default_rng(0)) == 0

    def test_sigma_of_noiseless_task(self):
        sigma_G, sigma_H = batch_oracles.estimate_sigma(
            QuadraticTask(A, b), [np.zeros(3), np.ones(3)], 16, RngStream.from_seed(4)
        )
        assert sigma_G == pytest.approx(0.0, abs=1e-12)
        assert sigma_H == pytest.approx(0.0, abs=1e-12)

    def test_sigma_of_noisy_task(self):
        task = QuadraticTask(A, b, grad_noise_std=0.2, hess_noise_std=0.3)
        sigma_G, sigma_H = batch_oracles.estimate_sigma(
            task, [np.zeros(3)], 20000, RngStream.from_seed(5)
        )
        assert sigma_G == pytest.approx(np.sqrt(3) * 0.2, rel=0.05)
        # a unit-Frobenius symmetric perturbation has mean squared action 1/d on unit vectors
        assert 0.0 < sigma_H <= 0.3 + 1e-9

    def test_constants_of_cubic_task(self):
        task = CubicRegularizedTask(A, b, rho=0.8)
        probes = list(batch_oracles.ball_points(6, 3, 1.0, np.random.default_rng(6)))
        estimate = batch_oracles.estimate_constants(task, probes, RngStream.from_seed(7), 32)
        assert estimate.L >= 3.0 - 1e-6
        assert estimate.L <= task.constants.L + 1e-6
        assert 0.0 < estimate.rho <= 0.8 + 1e-9
        assert estimate.B <= task.constants.B + 1e-9
        assert estimate.radius <= 1.0 + 1e-12

    def test_constants_need_two_probes(self):
        with pytest.raises(InvalidArgumentError):
            batch_oracles.estimate_constants(
                QuadraticTask(A, b), [np.zeros(3)], RngStream.from_seed(0)
            )
