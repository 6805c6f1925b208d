"""Finite-support probability mass functions over points of a metric space."""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.utils import ensure_finite

# Largest tolerated deviation of the total mass from one
MASS_TOL = 1e-12


class DiscreteDistribution:
    """A probability mass function on finitely many support points. Duplicate points are merged.

    Attributes:
        `support` (NDArray[np.float64]): Distinct support points, shape (k, p).
        `mass` (NDArray[np.float64]): Nonnegative masses summing to one, shape (k,).
    """

    def __init__(self, support: ArrayLike, mass: ArrayLike):
        """Initializes an instance of `DiscreteDistribution`.

        Args:
            `support` (ArrayLike): Points, shape (k, p), or (k,) for scalars.
            `mass` (ArrayLike): One mass per point.

        Raises:
            InvalidArgumentError: If masses are negative, do not sum to one within 1e-12, or do
                not match the support.
        """
        support = np.asarray(support, dtype=np.float64)
        if support.ndim == 1:
            support = support[:, np.newaxis]
        mass = np.asarray(mass, dtype=np.float64).reshape(-1)
        if support.ndim != 2 or support.shape[0] != mass.size or mass.size == 0:
            raise InvalidArgumentError("Support and mass must describe the same nonempty set")
        ensure_finite(support, "support point")
        ensure_finite(mass, "mass")
        if np.any(mass < 0):
            raise InvalidArgumentError("Masses must be nonnegative")
        if abs(float(mass.sum()) - 1.0) > MASS_TOL:
            raise InvalidArgumentError(f"Masses must sum to one, got {float(mass.sum())!r}")

        unique, inverse = np.unique(support, axis=0, return_inverse=True)
        merged = np.zeros(unique.shape[0])
        np.add.at(merged, inverse.reshape(-1), mass)
        self.__support = unique
        self.__mass = merged

    @classmethod
    def from_points(
        cls, points: ArrayLike, weights: Optional[ArrayLike] = None
    ) -> "DiscreteDistribution":
        """Empirical distribution of `points`, uniform unless `weights` are given."""
        points = np.asarray(points, dtype=np.float64)
        count = points.shape[0]
        if count == 0:
            raise InvalidArgumentError("Need at least one point")
        if weights is None:
            weights = np.full(count, 1.0 / count)
        else:
            weights = np.asarray(weights, dtype=np.float64)
            weights = weights / weights.sum()
        return cls(points, weights)

    @classmethod
    def from_labels(
        cls, labels: ArrayLike, num_classes: Optional[int] = None
    ) -> "DiscreteDistribution":
        """Empirical class-label distribution. With `num_classes`, every class 0..C-1 is in the
        support, possibly with zero mass."""
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.size == 0:
            raise InvalidArgumentError("Need at least one label")
        size = num_classes if num_classes is not None else int(labels.max()) + 1
        if np.any(labels < 0) or np.any(labels >= size):
            raise InvalidArgumentError(f"Labels must lie in [0, {size})")
        counts = np.bincount(labels, minlength=size).astype(np.float64)
        return cls(np.arange(size, dtype=np.float64), counts / counts.sum())

    def mass_at(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Mass of each row of `points`, zero outside the support."""
        lookup = {tuple(point): m for point, m in zip(self.__support, self.__mass)}
        return np.array([lookup.get(tuple(point), 0.0) for point in points])

    @property
    def support(self) -> NDArray[np.float64]:
        return self.__support

    @property
    def mass(self) -> NDArray[np.float64]:
        return self.__mass

    @property
    def dim(self) -> int:
        return self.__support.shape[1]

    def __len__(self) -> int:
        return self.__mass.size


def aligned(
    p: DiscreteDistribution, q: DiscreteDistribution
) -> Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Masses of p and q on the union of their supports.

    Returns:
        Tuple: (union support, mass of p, mass of q).
    """
    if p.dim != q.dim:
        raise InvalidArgumentError(f"Supports live in dimensions {p.dim} and {q.dim}")
    union = np.unique(np.concatenate([p.support, q.support]), axis=0)
    return union, p.mass_at(union), q.mass_at(union)


def mixture(
    distributions: Sequence[DiscreteDistribution], weights: Optional[ArrayLike] = None
) -> DiscreteDistribution:
    """Weighted average of distributions, by default the plain average p = (1/n) sum_i p_i."""
    if len(distributions) == 0:
        raise InvalidArgumentError("Need at least one distribution")
    if weights is None:
        weights = np.full(len(distributions), 1.0 / len(distributions))
    weights = np.asarray(weights, dtype=np.float64)
    support = np.concatenate([d.support for d in distributions])
    mass = np.concatenate([w * d.mass for w, d in zip(weights, distributions)])
    return DiscreteDistribution(support, mass / mass.sum())
