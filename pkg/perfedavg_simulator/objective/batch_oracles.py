"""Batch estimators of gradients and Hessian-vector products, and sampled estimates of the
constants a task does not declare."""

import logging
from typing import Sequence, Tuple

import numpy as np

from perfedavg_simulator.common.constants import HVP_PROBES
from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.kernel.rng import Purpose, RngStream
from perfedavg_simulator.objective.loss_model import DeclaredConstants, LossModel
from perfedavg_simulator.objective.samples import Batch

logger = logging.getLogger(__name__)

# Power iterations used to estimate a Hessian's spectral norm
_POWER_ITERATIONS = 30


def _check_batch(batch: Batch) -> None:
    if batch is None or batch.size < 1:
        raise InvalidArgumentError("Batch must hold at least one sample")


def batch_grad(model: LossModel, w: ParamVector, batch: Batch) -> ParamVector:
    """Unbiased estimate (1/|D|) sum_{s in D} grad l(w; s) of the task gradient.

    Raises:
        InvalidArgumentError: If the batch is empty or w has the wrong dimension.
    """
    _check_batch(batch)
    return model.batch_grad(batch, w)


def batch_hvp(model: LossModel, w: ParamVector, v: ParamVector, batch: Batch) -> ParamVector:
    """Unbiased estimate (1/|D|) sum_{s in D} hess l(w; s) v of the Hessian-vector product.

    Raises:
        InvalidArgumentError: If the batch is empty or w, v have the wrong dimension.
    """
    _check_batch(batch)
    return model.batch_hvp(batch, w, v)


def random_unit_vectors(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    directions = rng.normal(size=(count, dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def ball_points(count: int, dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in the ball of radius `radius` around the origin, shape (count, dim)."""
    scales = radius * rng.random(count) ** (1.0 / dim)
    return scales[:, np.newaxis] * random_unit_vectors(count, dim, rng)


def estimate_sigma(
    model: LossModel,
    probe_points: Sequence[ParamVector],
    samples_per_point: int,
    rng: RngStream,
) -> Tuple[float, float]:
    """Estimates the per-sample gradient and Hessian standard deviations.

    At every probe point, sigma_G^2 is estimated by the mean of |grad l(w; s) - grad f(w)|^2 over
    fresh samples s, and sigma_H^2 by the mean of |(hess l(w; s) - hess f(w)) v_s|^2 with v_s a
    random unit vector per sample. The maxima over probe points are returned.

    Args:
        `model` (LossModel): Task with exact oracles.
        `probe_points` (Sequence[ParamVector]): Points inside the domain of validity.
        `samples_per_point` (int): Samples drawn at each probe point.
        `rng` (RngStream): Stream of the draws.

    Returns:
        Tuple[float, float]: (sigma_G, sigma_H) estimates.
    """
    if samples_per_point < 1 or len(probe_points) == 0:
        raise InvalidArgumentError("Need at least one probe point and one sample per point")
    sigma_G_sq, sigma_H_sq = 0.0, 0.0
    for index, w in enumerate(probe_points):
        w = np.asarray(w, dtype=np.float64)
        generator = rng.child(Purpose.PROBE, index).generator()
        batch = model.draw_batch(samples_per_point, generator)
        deviations = model.per_sample_grads(batch, w) - model.exact_grad(w)[np.newaxis, :]
        sigma_G_sq = max(sigma_G_sq, float(np.mean(np.sum(deviations**2, axis=1))))

        directions = random_unit_vectors(batch.size, model.dim, generator)
        exact = np.stack([model.exact_hvp(w, v) for v in directions])
        hess_deviations = model.per_sample_hvps(batch, w, directions) - exact
        sigma_H_sq = max(sigma_H_sq, float(np.mean(np.sum(hess_deviations**2, axis=1))))
    return float(np.sqrt(sigma_G_sq)), float(np.sqrt(sigma_H_sq))


def hessian_norm_estimate(model: LossModel, w: ParamVector, rng: np.random.Generator) -> float:
    """Spectral norm of the exact Hessian at w by power iteration on Hessian-vector products."""
    v = random_unit_vectors(1, model.dim, rng)[0]
    estimate = 0.0
    for _ in range(_POWER_ITERATIONS):
        product = model.exact_hvp(w, v)
        estimate = float(np.linalg.norm(product))
        if estimate == 0.0:
            return 0.0
        v = product / estimate
    return estimate


def estimate_constants(
    model: LossModel,
    probes: Sequence[ParamVector],
    rng: RngStream,
    samples_per_point: int = 256,
) -> DeclaredConstants:
    """Sampled estimates of B, L, rho, sigma_G and sigma_H for tasks that do not declare them.

    B is the largest exact gradient norm over the probes, L the largest power-iteration estimate
    of the Hessian spectral norm, and rho the largest ratio |(H(w_1) - H(w_2)) v| / |w_1 - w_2|
    over consecutive probe pairs and random unit v. All are lower estimates of the true
    suprema.

    Args:
        `model` (LossModel): Task with exact oracles.
        `probes` (Sequence[ParamVector]): Probe points, at least two.
        `rng` (RngStream): Stream of the random directions and samples.
        `samples_per_point` (int, optional): Samples per probe for the noise levels.

    Returns:
        DeclaredConstants: The estimates.
    """
    if len(probes) < 2:
        raise InvalidArgumentError("Estimating constants needs at least two probe points")
    logger.debug(f"Estimating constants of {model.__class__.__name__} at {len(probes)} probes")
    generator = rng.child(Purpose.PROBE).generator()
    points = [np.asarray(w, dtype=np.float64) for w in probes]
    B = max(float(np.linalg.norm(model.exact_grad(w))) for w in points)
    L = max(hessian_norm_estimate(model, w, generator) for w in points)

    rho = 0.0
    for w_1, w_2 in zip(points, points[1:]):
        distance = float(np.linalg.norm(w_1 - w_2))
        if distance == 0.0:
            continue
        for v in random_unit_vectors(HVP_PROBES, model.dim, generator):
            gap = model.exact_hvp(w_1, v) - model.exact_hvp(w_2, v)
            rho = max(rho, float(np.linalg.norm(gap)) / distance)

    sigma_G, sigma_H = estimate_sigma(
        model, points, samples_per_point, rng.child(Purpose.MONTE_CARLO)
    )
    radius = max(float(np.linalg.norm(w)) for w in points)
    return DeclaredConstants(B=B, L=L, rho=rho, sigma_G=sigma_G, sigma_H=sigma_H, radius=radius)
