"""Task-similarity constants gamma_G^2 and gamma_H^2: sampled estimates, exact values for
quadratic federations, and the upper bounds implied by TV and 1-Wasserstein distances between
the users' data distributions."""

import itertools
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from perfedavg_simulator.common.constants import HVP_PROBES
from perfedavg_simulator.common.errors import InvalidArgumentError, numeric_errors
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.common.utils import atomic_write_text
from perfedavg_simulator.heterogeneity.distances import Metric, tv_distance, wasserstein1
from perfedavg_simulator.heterogeneity.distributions import DiscreteDistribution, mixture
from perfedavg_simulator.kernel.rng import Purpose, RngStream
from perfedavg_simulator.objective.batch_oracles import random_unit_vectors
from perfedavg_simulator.objective.loss_model import LossModel
from perfedavg_simulator.objective.quadratic import CubicRegularizedTask, QuadraticTask

logger = logging.getLogger(__name__)

SampleGradient = Callable[[ParamVector, ParamVector], ParamVector]
SampleHvp = Callable[[ParamVector, ParamVector, ParamVector], ParamVector]


def _mean_sq_deviation(rows: np.ndarray) -> float:
    """(1/n) sum_i |x_i - mean(x)|^2 over the rows x_i."""
    deviations = rows - rows.mean(axis=0, keepdims=True)
    return float(np.mean(np.sum(deviations**2, axis=1)))


def estimate_gamma(
    models: Sequence[LossModel],
    probe_points: Sequence[ParamVector],
    rng: RngStream,
    samples_per_probe: int = HVP_PROBES,
) -> Tuple[float, float]:
    """Sampled gamma_G^2 and gamma_H^2 of a federation.

    At every probe point w, gamma_G^2 is estimated by (1/n) sum_i |grad f_i(w) - grad f(w)|^2 and
    gamma_H^2 by the largest (1/n) sum_i |(hess f_i(w) - hess f(w)) v|^2 over random unit
    directions v. The maxima over probe points are returned. Both are lower estimates of the
    suprema, the Hessian term in particular only probes the operator norm.

    Args:
        `models` (Sequence[LossModel]): The users' tasks, with exact oracles.
        `probe_points` (Sequence[ParamVector]): Points to evaluate at.
        `rng` (RngStream): Stream of the random directions.
        `samples_per_probe` (int, optional): Directions per probe point.

    Returns:
        Tuple[float, float]: (gamma_G^2, gamma_H^2) estimates.
    """
    if len(models) == 0 or len(probe_points) == 0:
        raise InvalidArgumentError("Need at least one model and one probe point")
    if samples_per_probe < 1:
        raise InvalidArgumentError(
            f"Need at least one direction per probe, got {samples_per_probe}"
        )
    gamma_G_sq, gamma_H_sq = 0.0, 0.0
    for index, w in enumerate(probe_points):
        w = np.asarray(w, dtype=np.float64)
        grads = np.stack([model.exact_grad(w) for model in models])
        gamma_G_sq = max(gamma_G_sq, _mean_sq_deviation(grads))

        generator = rng.child(Purpose.PROBE, index).generator()
        for v in random_unit_vectors(samples_per_probe, models[0].dim, generator):
            hvps = np.stack([model.exact_hvp(w, v) for model in models])
            gamma_H_sq = max(gamma_H_sq, _mean_sq_deviation(hvps))
    return gamma_G_sq, gamma_H_sq


def exact_quadratic_gammas(tasks: Sequence[QuadraticTask], radius: float) -> Tuple[float, float]:
    """Upper bounds of gamma_G^2 and gamma_H^2 on the ball |w| <= radius for quadratic tasks.

    gamma_H^2 is exactly (1/n) sum_i |A_i - A|_2^2 with A the mean Hessian. Since
    grad f_i(w) - grad f(w) = (A_i - A) w + (b_i - b), gamma_G^2 is at most
    (1/n) sum_i (|A_i - A|_2 radius + |b_i - b|)^2.

    Raises:
        InvalidArgumentError: If a task is not a plain quadratic or the radius is negative.
    """
    if len(tasks) == 0:
        raise InvalidArgumentError("Need at least one task")
    if not radius >= 0:
        raise InvalidArgumentError(f"radius must be nonnegative, got {radius}")
    for task in tasks:
        if not isinstance(task, QuadraticTask) or isinstance(task, CubicRegularizedTask):
            raise InvalidArgumentError(f"{task.__class__.__name__} is not a plain quadratic task")
    A = np.stack([task.A for task in tasks])
    b = np.stack([task.b for task in tasks])
    with numeric_errors("Spectral norms of the Hessian deviations"):
        hess_gaps = np.array([np.linalg.norm(A_i - A.mean(axis=0), ord=2) for A_i in A])
    grad_gaps = np.linalg.norm(b - b.mean(axis=0), axis=1)
    gamma_H_sq = float(np.mean(hess_gaps**2))
    gamma_G_sq = float(np.mean((hess_gaps * radius + grad_gaps) ** 2))
    return gamma_G_sq, gamma_H_sq


def tv_distances(distributions: Sequence[DiscreteDistribution]) -> List[float]:
    """TV distance of every user's distribution to the average distribution."""
    average = mixture(distributions)
    return [tv_distance(p, average) for p in distributions]


def w1_distances(
    distributions: Sequence[DiscreteDistribution], metric: Optional[Metric] = None
) -> List[float]:
    """1-Wasserstein distance of every user's distribution to the average distribution."""
    average = mixture(distributions)
    return [wasserstein1(p, average, metric) for p in distributions]


def tv_gamma_bound(
    distributions: Sequence[DiscreteDistribution], B: float, L: float
) -> Tuple[float, float]:
    """Similarity bounds for tasks sharing one per-sample loss with gradient and Hessian norms at
    most B and L: 4B^2 and 4L^2 times the mean squared TV distance to the average distribution.

    Returns:
        Tuple[float, float]: Bounds on (gamma_G^2, gamma_H^2).
    """
    if not (B >= 0 and L >= 0):
        raise InvalidArgumentError(f"B and L must be nonnegative, got B={B}, L={L}")
    mean_sq = float(np.mean(np.square(tv_distances(distributions))))
    return 4.0 * B**2 * mean_sq, 4.0 * L**2 * mean_sq


def w1_gamma_bound(
    distributions: Sequence[DiscreteDistribution],
    L_Z: float,
    rho_Z: float,
    metric: Optional[Metric] = None,
) -> Tuple[float, float]:
    """Similarity bounds for tasks sharing one per-sample loss whose gradient and Hessian are
    L_Z- and rho_Z-Lipschitz in the data point: L_Z^2 and rho_Z^2 times the mean squared
    1-Wasserstein distance to the average distribution.

    Returns:
        Tuple[float, float]: Bounds on (gamma_G^2, gamma_H^2).
    """
    if not (L_Z >= 0 and rho_Z >= 0):
        raise InvalidArgumentError(f"L_Z and rho_Z must be nonnegative, got {L_Z}, {rho_Z}")
    mean_sq = float(np.mean(np.square(w1_distances(distributions, metric))))
    return L_Z**2 * mean_sq, rho_Z**2 * mean_sq


def estimate_data_lipschitz(
    loss_grad: SampleGradient,
    loss_hvp: SampleHvp,
    points: Sequence[ParamVector],
    probes: Sequence[ParamVector],
    rng: RngStream,
    directions: int = HVP_PROBES,
) -> Tuple[float, float]:
    """Sampled Lipschitz constants of the per-sample gradient and Hessian in the data point.

    L_Z is the largest |grad l(w, z_1) - grad l(w, z_2)| / d(z_1, z_2) and rho_Z the largest
    |(hess l(w, z_1) - hess l(w, z_2)) v| / d(z_1, z_2) over distinct pairs of `points`, probe
    parameters w and random unit directions v, with d the Euclidean distance.

    Args:
        `loss_grad` (SampleGradient): (w, z) -> grad l(w, z).
        `loss_hvp` (SampleHvp): (w, z, v) -> hess l(w, z) v.
        `points` (Sequence[ParamVector]): Data points z.
        `probes` (Sequence[ParamVector]): Parameter points w.
        `rng` (RngStream): Stream of the directions.
        `directions` (int, optional): Random unit directions per probe.

    Returns:
        Tuple[float, float]: (L_Z, rho_Z) estimates, lower bounds of the true constants.
    """
    points = [np.asarray(z, dtype=np.float64) for z in points]
    if len(points) < 2 or len(probes) == 0:
        raise InvalidArgumentError("Need at least two data points and one probe")
    L_Z, rho_Z = 0.0, 0.0
    for index, w in enumerate(probes):
        w = np.asarray(w, dtype=np.float64)
        unit = random_unit_vectors(directions, w.size, rng.child(Purpose.PROBE, index).generator())
        for z_1, z_2 in itertools.combinations(points, 2):
            distance = float(np.linalg.norm(z_1 - z_2))
            if distance == 0.0:
                continue
            L_Z = max(L_Z, float(np.linalg.norm(loss_grad(w, z_1) - loss_grad(w, z_2))) / distance)
            for v in unit:
                gap = loss_hvp(w, z_1, v) - loss_hvp(w, z_2, v)
                rho_Z = max(rho_Z, float(np.linalg.norm(gap)) / distance)
    return L_Z, rho_Z


@dataclass
class SimilarityReport:
    """Measured similarity of a federation next to the bounds its data distributions imply.

    Attributes:
        `gamma_G_sq` (float): Estimated gamma_G^2.
        `gamma_H_sq` (float): Estimated gamma_H^2, a lower estimate of the operator-norm value.
        `tv` (List[float]): TV distance of every user to the average distribution.
        `w1` (List[float]): 1-Wasserstein distance of every user to the average distribution.
        `tv_bound` (Optional[Tuple[float, float]]): TV-implied bounds, when B and L are known.
        `w1_bound` (Optional[Tuple[float, float]]): W1-implied bounds, when L_Z and rho_Z are known.
    """

    gamma_G_sq: float
    gamma_H_sq: float
    tv: List[float] = field(default_factory=list)
    w1: List[float] = field(default_factory=list)
    tv_bound: Optional[Tuple[float, float]] = None
    w1_bound: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        values = [self.gamma_G_sq, self.gamma_H_sq, *self.tv, *self.w1]
        for bound in (self.tv_bound, self.w1_bound):
            if bound is not None:
                values.extend(bound)
        if any(not value >= 0 for value in values):
            raise InvalidArgumentError("Similarity report entries must be nonnegative")
        if any(value > 1.0 for value in self.tv):
            raise InvalidArgumentError("TV distances must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def build_similarity_report(
    models: Sequence[LossModel],
    distributions: Sequence[DiscreteDistribution],
    probe_points: Sequence[ParamVector],
    rng: RngStream,
    B: Optional[float] = None,
    L: Optional[float] = None,
    L_Z: Optional[float] = None,
    rho_Z: Optional[float] = None,
    metric: Optional[Metric] = None,
) -> SimilarityReport:
    """Estimates the similarity constants and evaluates whichever distance bounds the supplied
    constants allow."""
    gamma_G_sq, gamma_H_sq = estimate_gamma(models, probe_points, rng)
    average = mixture(distributions)
    tv = [tv_distance(p, average) for p in distributions]
    w1 = [wasserstein1(p, average, metric) for p in distributions]
    tv_mean_sq, w1_mean_sq = float(np.mean(np.square(tv))), float(np.mean(np.square(w1)))
    tv_bound = w1_bound = None
    if B is not None and L is not None:
        tv_bound = (4.0 * B**2 * tv_mean_sq, 4.0 * L**2 * tv_mean_sq)
    if L_Z is not None and rho_Z is not None:
        w1_bound = (L_Z**2 * w1_mean_sq, rho_Z**2 * w1_mean_sq)
    logger.debug(
        f"Similarity of {len(models)} users: gamma_G^2={gamma_G_sq:.6g}, gamma_H^2={gamma_H_sq:.6g}"
    )
    return SimilarityReport(gamma_G_sq, gamma_H_sq, tv, w1, tv_bound, w1_bound)


def write_similarity_report(path: str, report: SimilarityReport) -> None:
    atomic_write_text(path, json.dumps(report.to_dict(), indent=4, sort_keys=True) + "\n")
    logger.info(f"Wrote similarity report to {path}")
