"""Central finite-difference oracles used to check analytic gradients and Hessian-vector
products."""

import numpy as np

from perfedavg_simulator.common.constants import DEFAULT_FD_STEP
from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector, ScalarField, VectorField
from perfedavg_simulator.common.utils import check_same_dim, ensure_finite


def _check_step(h: float) -> None:
    if not h > 0.0:
        raise InvalidArgumentError(f"Finite-difference step must be positive, got {h}")


def finite_diff_grad(f: ScalarField, w: ParamVector, h: float = DEFAULT_FD_STEP) -> ParamVector:
    """Approximates the gradient of f at w by central differences along each coordinate.

    Args:
        `f` (ScalarField): Scalar function of a parameter vector.
        `w` (ParamVector): Evaluation point.
        `h` (float, optional): Step size. Defaults to `DEFAULT_FD_STEP`.

    Raises:
        InvalidArgumentError: If h is not positive.
        NumericError: If any evaluation of f is not finite.

    Returns:
        ParamVector: The approximation, with per-coordinate error O(h^2).
    """
    _check_step(h)
    w = np.asarray(w, dtype=np.float64)
    grad = np.zeros_like(w)
    probe = w.copy()
    for j in range(w.size):
        probe[j] = w[j] + h
        f_plus = float(f(probe))
        probe[j] = w[j] - h
        f_minus = float(f(probe))
        probe[j] = w[j]
        ensure_finite(np.array([f_plus, f_minus]), "function value")
        grad[j] = (f_plus - f_minus) / (2.0 * h)
    return grad


def finite_diff_hvp(
    grad: VectorField, w: ParamVector, v: ParamVector, h: float = DEFAULT_FD_STEP
) -> ParamVector:
    """Approximates the Hessian-vector product H(w) v by a central difference of gradients
    along v.

    Args:
        `grad` (VectorField): Gradient of the function.
        `w` (ParamVector): Evaluation point.
        `v` (ParamVector): Direction.
        `h` (float, optional): Step size. Defaults to `DEFAULT_FD_STEP`.

    Returns:
        ParamVector: (grad(w + h v) - grad(w - h v)) / (2 h).
    """
    _check_step(h)
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    check_same_dim(w.size, v, "direction")
    g_plus = np.asarray(grad(w + h * v), dtype=np.float64)
    g_minus = np.asarray(grad(w - h * v), dtype=np.float64)
    ensure_finite(g_plus, "gradient")
    ensure_finite(g_minus, "gradient")
    return (g_plus - g_minus) / (2.0 * h)
