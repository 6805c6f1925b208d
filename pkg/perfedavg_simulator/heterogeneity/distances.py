"""Total variation and 1-Wasserstein distances between discrete distributions."""

import itertools
import logging
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog
from scipy.spatial.distance import cdist
from scipy.stats import wasserstein_distance

from perfedavg_simulator.common.constants import W1_MAX_SUPPORT
from perfedavg_simulator.common.errors import InvalidArgumentError, NumericError
from perfedavg_simulator.heterogeneity.distributions import DiscreteDistribution, aligned

logger = logging.getLogger(__name__)

Metric = Callable[[NDArray[np.float64], NDArray[np.float64]], float]

# Points used to probe a user-supplied metric for the metric axioms
_METRIC_PROBES = 8
_METRIC_TOL = 1e-12


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Total variation distance 1/2 sum_z |p(z) - q(z)| over the union of the supports.

    Returns:
        float: The distance, in [0, 1].
    """
    _, p_mass, q_mass = aligned(p, q)
    return float(min(1.0, max(0.0, 0.5 * np.sum(np.abs(p_mass - q_mass)))))


def check_metric(metric: Metric, *supports: NDArray[np.float64]) -> None:
    """Probes a distance function for symmetry, nonnegativity and zero self-distance on pairs of
    points drawn evenly from each of the given supports.

    Raises:
        InvalidArgumentError: If an axiom fails on a probe pair.
    """
    per_support = max(1, _METRIC_PROBES // max(1, len(supports)))
    probes = [point for points in supports for point in points[:per_support]]
    for x in probes:
        if abs(float(metric(x, x))) > _METRIC_TOL:
            raise InvalidArgumentError(f"Metric does not vanish on the pair ({x}, {x})")
    for x, y in itertools.combinations(probes, 2):
        forward, backward = float(metric(x, y)), float(metric(y, x))
        if forward < 0:
            raise InvalidArgumentError(f"Metric is negative on ({x}, {y})")
        if abs(forward - backward) > _METRIC_TOL * max(1.0, abs(forward)):
            raise InvalidArgumentError(f"Metric is not symmetric on ({x}, {y})")


def _transport_cost(cost: NDArray[np.float64], p_mass, q_mass) -> float:
    """Optimal transport cost between two finite supports by linear programming over couplings."""
    rows, cols = cost.shape
    row_sums = np.kron(np.eye(rows), np.ones(cols))
    col_sums = np.kron(np.ones(rows), np.eye(cols))
    # One marginal constraint is implied by the others
    A_eq = np.vstack([row_sums, col_sums])[:-1]
    b_eq = np.concatenate([p_mass, q_mass])[:-1]
    result = linprog(cost.reshape(-1), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not result.success:
        raise NumericError(f"Transport linear program failed: {result.message}")
    return max(0.0, float(result.fun))


def wasserstein1(
    p: DiscreteDistribution, q: DiscreteDistribution, metric: Optional[Metric] = None
) -> float:
    """1-Wasserstein distance: the least expected cost d(X, Y) over couplings of p and q.

    Scalar supports under the default Euclidean metric use the sorted-CDF formula. Otherwise the
    coupling is found exactly by linear programming, which is offered for supports of at most
    `W1_MAX_SUPPORT` points with positive mass.

    Args:
        `p` (DiscreteDistribution): First distribution.
        `q` (DiscreteDistribution): Second distribution.
        `metric` (Optional[Metric], optional): Ground distance on support points. Defaults to
            the Euclidean distance.

    Raises:
        InvalidArgumentError: If the metric fails a probe or a support exceeds the cap.

    Returns:
        float: The distance.
    """
    if p.dim != q.dim:
        raise InvalidArgumentError(f"Supports live in dimensions {p.dim} and {q.dim}")
    if metric is None and p.dim == 1:
        return float(wasserstein_distance(p.support[:, 0], q.support[:, 0], p.mass, q.mass))

    p_keep, q_keep = p.mass > 0, q.mass > 0
    p_points, q_points = p.support[p_keep], q.support[q_keep]
    if p_points.shape[0] > W1_MAX_SUPPORT or q_points.shape[0] > W1_MAX_SUPPORT:
        raise InvalidArgumentError(
            f"Exact W1 is limited to {W1_MAX_SUPPORT} support points beyond one dimension, got "
            f"{p_points.shape[0]} and {q_points.shape[0]}"
        )
    if metric is None:
        cost = cdist(p_points, q_points)
    else:
        check_metric(metric, p_points, q_points)
        cost = cdist(p_points, q_points, metric=metric)
    logger.debug(f"Solving a {cost.shape[0]} x {cost.shape[1]} transport problem")
    return _transport_cost(cost, p.mass[p_keep], q.mass[q_keep])
