"""Exact, stochastic, first-order and Hessian-free estimates of the meta-gradient grad F_i(w),
and the local Per-FedAvg update built on them.

Every estimate runs in two stages: an inner step w~ = w - alpha g(w, D), then an outer estimate
at w~ corrected by a Hessian term evaluated at w. Each batch comes from its own child stream of
the caller's stream (`Purpose.INNER_GRAD`, `Purpose.OUTER_GRAD`, `Purpose.HESSIAN`), so the
batches of one call are independent and a call is reproducible from its stream alone.
"""

import logging
from typing import Dict

import numpy as np

from perfedavg_simulator.common.constants import HF_DELTA_SCALE
from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.common.utils import check_same_dim
from perfedavg_simulator.kernel.rng import Purpose, RngStream
from perfedavg_simulator.metagrad.estimator_config import (
    EstimatorKind,
    MetaEstimator,
    MetaGradSample,
)
from perfedavg_simulator.metagrad.meta_function import meta_grad_exact
from perfedavg_simulator.objective.batch_oracles import batch_grad, batch_hvp
from perfedavg_simulator.objective.loss_model import LossModel
from perfedavg_simulator.objective.samples import Batch

logger = logging.getLogger(__name__)


def _draw(model: LossModel, size: int, rng: RngStream, purpose: Purpose) -> Batch:
    return model.draw_batch(size, rng.child(purpose).generator())


def hf_delta(est: MetaEstimator, probe: ParamVector) -> float:
    """Probe scale of the Hessian-free difference: the configured delta, or
    1e-3 / max(1, |probe|)."""
    if est.delta is not None:
        return est.delta
    return HF_DELTA_SCALE / max(1.0, float(np.linalg.norm(probe)))


def inner_step(model: LossModel, w: ParamVector, est: MetaEstimator, rng: RngStream) -> ParamVector:
    """First stage: the adapted point w~ = w - alpha g, with g the exact gradient for the exact
    estimator and a batch-D gradient otherwise.

    Args:
        `model` (LossModel): The client's task.
        `w` (ParamVector): Current local iterate.
        `est` (MetaEstimator): Estimator configuration.
        `rng` (RngStream): Stream of this local step.

    Returns:
        ParamVector: The adapted point.
    """
    check_same_dim(model.dim, w, "parameters")
    if est.kind is EstimatorKind.EXACT:
        gradient = model.exact_grad(w)
    else:
        gradient = batch_grad(model, w, _draw(model, est.inner_batch, rng, Purpose.INNER_GRAD))
    return w - est.alpha * gradient


def outer_estimate(
    model: LossModel,
    w: ParamVector,
    inner_point: ParamVector,
    est: MetaEstimator,
    rng: RngStream,
) -> ParamVector:
    """Second stage: the meta-gradient estimate given the adapted point.

    Args:
        `model` (LossModel): The client's task.
        `w` (ParamVector): Current local iterate, where the Hessian term is evaluated.
        `inner_point` (ParamVector): The adapted point from `inner_step`.
        `est` (MetaEstimator): Estimator configuration.
        `rng` (RngStream): Stream of this local step.

    Returns:
        ParamVector: The estimate of grad F_i(w).
    """
    alpha = est.alpha
    if est.kind is EstimatorKind.EXACT:
        outer = model.exact_grad(inner_point)
        return outer - alpha * model.exact_hvp(w, outer)

    outer = batch_grad(model, inner_point, _draw(model, est.outer_batch, rng, Purpose.OUTER_GRAD))
    if est.kind is EstimatorKind.FO:
        return outer

    hessian_batch = _draw(model, est.hessian_batch, rng, Purpose.HESSIAN)
    if est.kind is EstimatorKind.STOCHASTIC:
        return outer - alpha * batch_hvp(model, w, outer, hessian_batch)

    delta = hf_delta(est, outer)
    difference = (
        batch_grad(model, w + delta * outer, hessian_batch)
        - batch_grad(model, w - delta * outer, hessian_batch)
    ) / (2.0 * delta)
    return outer - alpha * difference


def outer_step(
    model: LossModel,
    w: ParamVector,
    inner_point: ParamVector,
    est: MetaEstimator,
    beta: float,
    rng: RngStream,
) -> ParamVector:
    """Second stage of the local update: w - beta times the outer estimate."""
    return w - beta * outer_estimate(model, w, inner_point, est, rng)


def _batches_used(est: MetaEstimator) -> Dict[str, int]:
    if est.kind is EstimatorKind.EXACT:
        return {}
    used = {"inner": est.inner_batch, "outer": est.outer_batch}
    if est.uses_hessian_batch:
        used["hessian"] = est.hessian_batch
    return used


def estimate_meta_grad(
    model: LossModel, w: ParamVector, est: MetaEstimator, rng: RngStream
) -> MetaGradSample:
    """Estimates grad F_i(w) with the estimator family named by `est.kind`.

    Args:
        `model` (LossModel): The client's task.
        `w` (ParamVector): Point of the estimate.
        `est` (MetaEstimator): Estimator configuration.
        `rng` (RngStream): Stream of the draws. Equal streams give bit-identical estimates.

    Returns:
        MetaGradSample: The estimate and the adapted point it was computed from.
    """
    if est.kind is EstimatorKind.EXACT:
        inner_point = w - est.alpha * model.exact_grad(w)
        return MetaGradSample(value=meta_grad_exact(model, w, est.alpha), inner_point=inner_point)
    inner_point = inner_step(model, w, est, rng)
    value = outer_estimate(model, w, inner_point, est, rng)
    return MetaGradSample(value=value, inner_point=inner_point, batches_used=_batches_used(est))


def _require_kind(est: MetaEstimator, kind: EstimatorKind) -> None:
    if est.kind is not kind:
        raise InvalidArgumentError(f"Expected a {kind.value} estimator, got {est.kind.value}")


def meta_grad_stochastic(
    model: LossModel, w: ParamVector, est: MetaEstimator, rng: RngStream
) -> MetaGradSample:
    """(I - alpha H~(w, D'')) g~(w - alpha g~(w, D), D') with three independent batches."""
    _require_kind(est, EstimatorKind.STOCHASTIC)
    return estimate_meta_grad(model, w, est, rng)


def meta_grad_fo(
    model: LossModel, w: ParamVector, est: MetaEstimator, rng: RngStream
) -> MetaGradSample:
    """First-order estimate g~(w - alpha g~(w, D), D'). The Hessian term is dropped and no
    Hessian batch is drawn."""
    _require_kind(est, EstimatorKind.FO)
    return estimate_meta_grad(model, w, est, rng)


def meta_grad_hf(
    model: LossModel, w: ParamVector, est: MetaEstimator, rng: RngStream
) -> MetaGradSample:
    """Hessian-free estimate g' - alpha d~, with g' = g~(w - alpha g~(w, D), D') and
    d~ = (g~(w + delta g', D'') - g~(w - delta g', D'')) / (2 delta)."""
    _require_kind(est, EstimatorKind.HF)
    return estimate_meta_grad(model, w, est, rng)


def local_update_step(
    model: LossModel,
    w: ParamVector,
    est: MetaEstimator,
    beta: float,
    rng: RngStream,
    two_stage: bool = False,
) -> ParamVector:
    """One local Per-FedAvg step w - beta grad~ F_i(w).

    Args:
        `model` (LossModel): The client's task.
        `w` (ParamVector): Current local iterate.
        `est` (MetaEstimator): Estimator configuration.
        `beta` (float): Outer stepsize, nonnegative.
        `rng` (RngStream): Stream of this local step.
        `two_stage` (bool, optional): Compute through `inner_step` then `outer_step` instead of
            the one-shot estimate. Both forms return bit-identical vectors. Defaults to False.

    Raises:
        InvalidArgumentError: If beta is negative.

    Returns:
        ParamVector: The next local iterate.
    """
    if not beta >= 0:
        raise InvalidArgumentError(f"beta must be nonnegative, got {beta}")
    if two_stage:
        return outer_step(model, w, inner_step(model, w, est, rng), est, beta, rng)
    return w - beta * estimate_meta_grad(model, w, est, rng).value
