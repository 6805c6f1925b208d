"""Uniform subset sampling without replacement and the finite-population variance it induces."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.utils import ensure_finite, round_half_up
from perfedavg_simulator.kernel.rng import RngStream

logger = logging.getLogger(__name__)

# Trials drawn per vectorized chunk in the Monte-Carlo subset variance
_TRIAL_CHUNK = 65536


@dataclass(frozen=True)
class IndexSubset:
    """A subset of {0, ..., n-1} stored as strictly increasing indices.

    Attributes:
        `indices` (Tuple[int, ...]): Members of the subset in increasing order.
        `population` (int): Size n of the set the subset was drawn from.
    """

    indices: Tuple[int, ...]
    population: int

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise InvalidArgumentError(f"Subset indices must be strictly increasing: {indices}")
        if indices and (indices[0] < 0 or indices[-1] >= self.population):
            raise InvalidArgumentError(f"Subset indices must lie in [0, {self.population})")
        object.__setattr__(self, "indices", indices)

    @property
    def size(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, item: object) -> bool:
        return item in self.indices


def participant_count(n: int, r: float) -> int:
    """Number of active users per round: r*n rounded half up, with a floor of one.

    Args:
        `n` (int): Number of users.
        `r` (float): Participation fraction in (0, 1].

    Returns:
        int: The active set size, between 1 and n.
    """
    if n < 1:
        raise InvalidArgumentError(f"User count must be positive, got {n}")
    if not 0.0 < r <= 1.0:
        raise InvalidArgumentError(f"Participation fraction must lie in (0, 1], got {r}")
    return min(n, max(1, round_half_up(r * n)))


def _check_counts(n: int, m: int) -> None:
    if n < 1 or m < 1 or m > n:
        raise InvalidArgumentError(f"Subset size must satisfy 1 <= m <= n, got n={n}, m={m}")


def sample_without_replacement(n: int, m: int, rng: RngStream) -> IndexSubset:
    """Draws a subset of size m uniformly among all C(n, m) subsets of {0, ..., n-1}.

    Args:
        `n` (int): Population size.
        `m` (int): Subset size.
        `rng` (RngStream): Stream the draw comes from. Equal streams give equal subsets.

    Raises:
        InvalidArgumentError: If m is zero or larger than n.

    Returns:
        IndexSubset: The drawn subset.
    """
    _check_counts(n, m)
    chosen = rng.generator().choice(n, size=m, replace=False)
    return IndexSubset(indices=tuple(sorted(int(i) for i in chosen)), population=n)


def _as_value_matrix(values: Sequence[ArrayLike]) -> NDArray[np.float64]:
    if len(values) == 0:
        raise InvalidArgumentError("Values must be nonempty")
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, np.newaxis]
    if matrix.ndim != 2:
        raise InvalidArgumentError(
            f"Values must be scalars or equal-length vectors, got {matrix.shape}"
        )
    ensure_finite(matrix, "values")
    return matrix


def population_variance(values: Sequence[ArrayLike]) -> float:
    """Returns sigma^2 = (1/n) * sum_i |a_i - mu|^2 of scalars or vectors."""
    matrix = _as_value_matrix(values)
    deviations = matrix - matrix.mean(axis=0)
    return float(np.mean(np.sum(deviations**2, axis=1)))


def finite_population_variance(values: Sequence[ArrayLike], m: int) -> float:
    """Closed form of E|mean of a uniform m-subset - mu|^2, sigma^2 (1 - r) / (r (n - 1)) with
    r = m/n.

    Args:
        `values` (Sequence[ArrayLike]): Population a_1, ..., a_n.
        `m` (int): Subset size.

    Returns:
        float: The variance of the subset mean. Zero when m equals n.
    """
    matrix = _as_value_matrix(values)
    n = matrix.shape[0]
    _check_counts(n, m)
    if m == n:
        return 0.0
    r = m / n
    return population_variance(matrix) * (1.0 - r) / (r * (n - 1))


def subset_variance_exact(values: Sequence[ArrayLike], m: int) -> float:
    """Enumerates all C(n, m) subsets and averages the squared deviation of their means.

    Args:
        `values` (Sequence[ArrayLike]): Population a_1, ..., a_n.
        `m` (int): Subset size.

    Returns:
        float: E|mean of a uniform m-subset - mu|^2 by brute force.
    """
    matrix = _as_value_matrix(values)
    n = matrix.shape[0]
    _check_counts(n, m)
    mu = matrix.mean(axis=0)
    terms = [
        float(np.sum((matrix[list(subset)].mean(axis=0) - mu) ** 2))
        for subset in itertools.combinations(range(n), m)
    ]
    return math.fsum(terms) / len(terms)


def subset_mean_variance(
    values: Sequence[ArrayLike], m: int, trials: int, rng: RngStream
) -> float:
    """Monte-Carlo estimate of E|(1/m) sum_{i in A} a_i - mu|^2 over uniform m-subsets A.

    Args:
        `values` (Sequence[ArrayLike]): Population a_1, ..., a_n, scalars or equal-length vectors.
        `m` (int): Subset size.
        `trials` (int): Number of subsets drawn.
        `rng` (RngStream): Stream of the draws.

    Raises:
        InvalidArgumentError: If trials is zero or the subset size is invalid.

    Returns:
        float: The estimate. Exactly zero when m equals n or all values are identical.
    """
    matrix = _as_value_matrix(values)
    n = matrix.shape[0]
    _check_counts(n, m)
    if trials < 1:
        raise InvalidArgumentError(f"Trial count must be positive, got {trials}")
    if m == n or np.all(matrix == matrix[0]):
        return 0.0

    logger.debug(f"Drawing {trials} subsets of size {m} out of {n}")
    mu = matrix.mean(axis=0)
    generator = rng.generator()
    partial_sums = []
    remaining = trials
    while remaining > 0:
        chunk = min(remaining, _TRIAL_CHUNK)
        # The first m positions of a random permutation form a uniform m-subset
        subsets = np.argsort(generator.random((chunk, n)), axis=1)[:, :m]
        means = matrix[subsets].mean(axis=1)
        partial_sums.append(float(np.sum((means - mu) ** 2)))
        remaining -= chunk
    return math.fsum(partial_sums) / trials
