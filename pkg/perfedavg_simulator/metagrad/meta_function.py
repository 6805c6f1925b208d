"""The meta-function F_i(w) = f_i(w - alpha grad f_i(w)) and its exact gradient."""

from typing import Sequence

import numpy as np

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.metagrad.decorators import require_exact_oracle
from perfedavg_simulator.objective.loss_model import LossModel


def _check_alpha(alpha: float) -> None:
    if not alpha >= 0:
        raise InvalidArgumentError(f"alpha must be nonnegative, got {alpha}")


@require_exact_oracle
def meta_loss(model: LossModel, w: ParamVector, alpha: float) -> float:
    """Loss after one exact inner gradient step, f_i(w - alpha grad f_i(w)).

    Args:
        `model` (LossModel): Task with exact oracles.
        `w` (ParamVector): Model parameters.
        `alpha` (float): Inner stepsize.

    Raises:
        UnsupportedOperationError: If the model has no exact oracle.

    Returns:
        float: F_i(w).
    """
    _check_alpha(alpha)
    return model.exact_loss(w - alpha * model.exact_grad(w))


@require_exact_oracle
def meta_grad_exact(model: LossModel, w: ParamVector, alpha: float) -> ParamVector:
    """Exact meta-gradient (I - alpha hess f_i(w)) grad f_i(w - alpha grad f_i(w)), computed
    matrix-free from one gradient at w, one gradient at the adapted point and one
    Hessian-vector product at w.

    Args:
        `model` (LossModel): Task with exact oracles.
        `w` (ParamVector): Model parameters.
        `alpha` (float): Inner stepsize.

    Raises:
        UnsupportedOperationError: If the model has no exact oracle.

    Returns:
        ParamVector: grad F_i(w).
    """
    _check_alpha(alpha)
    inner_point = w - alpha * model.exact_grad(w)
    outer = model.exact_grad(inner_point)
    return outer - alpha * model.exact_hvp(w, outer)


def meta_objective(models: Sequence[LossModel], w: ParamVector, alpha: float) -> float:
    """F(w) = (1/n) sum_i F_i(w)."""
    return float(np.mean([meta_loss(model, w, alpha) for model in models]))


def meta_gradient(models: Sequence[LossModel], w: ParamVector, alpha: float) -> ParamVector:
    """grad F(w) = (1/n) sum_i grad F_i(w)."""
    return np.mean(np.stack([meta_grad_exact(model, w, alpha) for model in models]), axis=0)
