"""Tests classes and functions in perfedavg_simulator/objective/discrete.py"""

import numpy as np
import pytest

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.kernel.finite_diff import finite_diff_grad, finite_diff_hvp
from perfedavg_simulator.objective.discrete import PseudoHuberMixtureTask

SUPPORT = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])


@pytest.fixture
def task():
    return PseudoHuberMixtureTask(SUPPORT, [0.5, 0.3, 0.2])


class TestPseudoHuberMixtureTask:
    def test_exact_oracles_match_finite_differences(self, task):
        w = np.array([0.3, -0.4])
        v = np.array([1.0, 0.5])
        assert np.allclose(task.exact_grad(w), finite_diff_grad(task.exact_loss, w), atol=1e-8)
        assert np.allclose(task.exact_hvp(w, v), finite_diff_hvp(task.exact_grad, w, v), atol=1e-8)

    def test_sample_oracles(self):
        w, z, v = np.array([1.0, 1.0]), np.zeros(2), np.array([0.0, 1.0])
        assert np.allclose(PseudoHuberMixtureTask.sample_grad(w, z), w / np.sqrt(3.0))
        expected = (v - w * (w @ v) / 3.0) / np.sqrt(3.0)
        assert np.allclose(PseudoHuberMixtureTask.sample_hvp(w, z, v), expected)

    def test_global_constants(self, task):
        constants = task.constants
        assert (constants.B, constants.L, constants.rho) == (1.0, 1.0, 2.0)
        assert constants.radius is None

    def test_batches_carry_support_indices(self, task):
        batch = task.draw_batch(4000, np.random.default_rng(0))
        assert np.array_equal(batch.features, SUPPORT[batch.labels])
        assert np.allclose(np.bincount(batch.labels) / 4000, [0.5, 0.3, 0.2], atol=0.03)

    @pytest.mark.parametrize(
        "support, mass",
        [(SUPPORT, [0.5, 0.5]), (SUPPORT, [0.6, 0.6, -0.2]), (SUPPORT, [0.2, 0.2, 0.2])],
    )
    def test_rejects_invalid(self, support, mass):
        with pytest.raises(InvalidArgumentError):
            PseudoHuberMixtureTask(support, mass)
