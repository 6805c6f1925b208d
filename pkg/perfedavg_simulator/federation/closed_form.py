"""Closed-form minimizer of the meta-objective of a noiseless quadratic federation."""

import logging
from typing import Sequence

import numpy as np

from perfedavg_simulator.common.constants import MAX_CONDITION_NUMBER
from perfedavg_simulator.common.errors import (
    InvalidArgumentError,
    SingularSystemError,
    numeric_errors,
)
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.objective.quadratic import CubicRegularizedTask, QuadraticTask

logger = logging.getLogger(__name__)


def minimize_F_closed_form(tasks: Sequence[QuadraticTask], alpha: float) -> ParamVector:
    """Solves grad F(w) = 0 for quadratic tasks. With P_i = I - alpha A_i,
    grad F_i(w) = P_i A_i P_i w + P_i^2 b_i is affine in w, so the stationary point solves
    M w = -c with M = mean P_i A_i P_i and c = mean P_i^2 b_i.

    Args:
        `tasks` (Sequence[QuadraticTask]): The federation. Cubic-regularized tasks are rejected.
        `alpha` (float): Inner stepsize.

    Raises:
        InvalidArgumentError: If there are no tasks or a task is not purely quadratic.
        SingularSystemError: If M is singular or too ill-conditioned to trust the solution.
        NumericError: If M holds non-finite entries.

    Returns:
        ParamVector: The stationary point w* of F.
    """
    if len(tasks) == 0:
        raise InvalidArgumentError("Need at least one task")
    if any(not isinstance(t, QuadraticTask) or isinstance(t, CubicRegularizedTask) for t in tasks):
        raise InvalidArgumentError("The closed form only applies to quadratic tasks")
    d = tasks[0].dim
    identity = np.eye(d)
    M = np.zeros((d, d))
    c = np.zeros(d)
    for task in tasks:
        P = identity - alpha * task.A
        M += P @ task.A @ P
        c += P @ (P @ task.b)
    M /= len(tasks)
    c /= len(tasks)

    with numeric_errors("Conditioning the meta-stationary system"):
        condition = np.linalg.cond(M)
    if not np.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        logger.warning(f"Declining the closed-form solve, condition number {condition:.3g}")
        raise SingularSystemError(f"Meta-stationary system is singular (condition {condition:.3g})")
    try:
        return np.linalg.solve(M, -c)
    except np.linalg.LinAlgError as error:
        raise SingularSystemError(f"Meta-stationary system is singular: {error}") from error
