"""Tests classes and functions in perfedavg_simulator/kernel/finite_diff.py"""

import numpy as np
import pytest

from perfedavg_simulator.common.errors import InvalidArgumentError, NumericError
from perfedavg_simulator.kernel.finite_diff import finite_diff_grad, finite_diff_hvp

A = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]])
b = np.array([1.0, -2.0, 0.5])


def quadratic(w):
    return 0.5 * w @ A @ w + b @ w


def quadratic_grad(w):
    return A @ w + b


class TestFiniteDiffGrad:
    @pytest.mark.parametrize("w", [np.zeros(3), np.array([1.0, -1.0, 2.0])])
    def test_quadratic(self, w):
        assert np.allclose(finite_diff_grad(quadratic, w), quadratic_grad(w), atol=1e-8)

    def test_smooth_nonlinear(self):
        w = np.array([0.3, -0.7])
        expected = np.array([np.cos(w[0]) * np.exp(w[1]), np.sin(w[0]) * np.exp(w[1])])
        actual = finite_diff_grad(lambda x: np.sin(x[0]) * np.exp(x[1]), w)
        assert np.allclose(actual, expected, atol=1e-8)

    @pytest.mark.parametrize("h", [0.0, -1e-5])
    def test_rejects_step(self, h):
        with pytest.raises(InvalidArgumentError):
            finite_diff_grad(quadratic, np.zeros(3), h)

    def test_rejects_non_finite_values(self):
        with pytest.raises(NumericError):
            finite_diff_grad(lambda w: np.inf, np.zeros(2))


class TestFiniteDiffHvp:
    def test_quadratic_is_exact(self):
        v = np.array([0.2, 1.0, -0.4])
        assert np.allclose(finite_diff_hvp(quadratic_grad, np.ones(3), v), A @ v, atol=1e-9)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            finite_diff_hvp(quadratic_grad, np.zeros(3), np.zeros(2))
