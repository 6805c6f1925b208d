"""Interface of a user's task: per-sample and batch oracles, exact oracles, declared constants."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from typing import Dict, Optional

import numpy as np
from numpy.typing import NDArray

from perfedavg_simulator.common.errors import InvalidArgumentError, UnsupportedOperationError
from perfedavg_simulator.common.types import Matrix, ParamVector
from perfedavg_simulator.common.utils import check_same_dim
from perfedavg_simulator.objective.samples import Batch, Sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeclaredConstants:
    """Constants a task guarantees on the ball of radius `radius` around the origin. Any of them
    may be unknown (None).

    Attributes:
        `B` (Optional[float]): Bound on the norm of the expected gradient.
        `L` (Optional[float]): Smoothness, a bound on the spectral norm of the Hessian.
        `rho` (Optional[float]): Lipschitz constant of the Hessian in spectral norm.
        `sigma_G` (Optional[float]): Bound on the per-sample gradient standard deviation.
        `sigma_H` (Optional[float]): Bound on the per-sample Hessian standard deviation.
        `radius` (Optional[float]): Radius of the domain the constants hold on. None if global.
    """

    B: Optional[float] = None
    L: Optional[float] = None
    rho: Optional[float] = None
    sigma_G: Optional[float] = None
    sigma_H: Optional[float] = None
    radius: Optional[float] = None

    def __post_init__(self):
        for field in fields(self):
            value = getattr(self, field.name)
            if value is not None and not value >= 0:
                raise InvalidArgumentError(
                    f"Constant {field.name} must be nonnegative, got {value}"
                )

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {field.name: getattr(self, field.name) for field in fields(self)}


class LossModel(ABC):
    """A user's task f_i(w) = E_{(x, y) ~ p_i} l_i(w; x, y).

    Subclasses implement the batch oracles `_batch_loss`, `_batch_grad` and `_batch_hvp` and the
    sampler `_draw_batch`. Analytic subclasses also override `_exact_loss`, `_exact_grad` and
    `_exact_hvp`; otherwise exact oracles are full-batch evaluations over `evaluation_set`, when
    one is supplied.

    Attributes:
        `dim` (int): Parameter dimension d.
        `constants` (DeclaredConstants): Constants the task guarantees.
        `evaluation_set` (Optional[Batch]): Finite dataset defining f_i for non-analytic tasks.
    """

    def __init__(
        self,
        dim: int,
        constants: DeclaredConstants = DeclaredConstants(),
        evaluation_set: Optional[Batch] = None,
    ):
        """Initializes an instance of `LossModel`. Note that this class cannot be instantiated
        directly since it is abstract.

        Args:
            `dim` (int): Parameter dimension d.
            `constants` (DeclaredConstants, optional): Constants the task guarantees. Defaults to
                all unknown.
            `evaluation_set` (Optional[Batch], optional): Full dataset used by the exact oracles
                of non-analytic tasks. Defaults to None.
        """
        if dim < 1:
            raise InvalidArgumentError(f"Parameter dimension must be positive, got {dim}")
        self.__dim = dim
        self.__constants = constants
        self.__evaluation_set = evaluation_set

    # Per-sample oracles

    def loss(self, sample: Sample, w: ParamVector) -> float:
        return self.batch_loss(Batch.from_samples([sample]), w)

    def grad_sample(self, sample: Sample, w: ParamVector) -> ParamVector:
        return self.batch_grad(Batch.from_samples([sample]), w)

    def hvp_sample(self, sample: Sample, w: ParamVector, v: ParamVector) -> ParamVector:
        return self.batch_hvp(Batch.from_samples([sample]), w, v)

    # Batch oracles

    def batch_loss(self, batch: Batch, w: ParamVector) -> float:
        """Mean per-sample loss over the batch."""
        check_same_dim(self.dim, w, "parameters")
        return float(self._batch_loss(batch, w))

    def batch_grad(self, batch: Batch, w: ParamVector) -> ParamVector:
        """Mean per-sample gradient over the batch."""
        check_same_dim(self.dim, w, "parameters")
        return self._batch_grad(batch, w)

    def batch_hvp(self, batch: Batch, w: ParamVector, v: ParamVector) -> ParamVector:
        """Mean per-sample Hessian-vector product over the batch."""
        check_same_dim(self.dim, w, "parameters")
        check_same_dim(self.dim, v, "direction")
        return self._batch_hvp(batch, w, v)

    def per_sample_grads(self, batch: Batch, w: ParamVector) -> NDArray[np.float64]:
        """Gradients of every sample of the batch, shape (size, d)."""
        check_same_dim(self.dim, w, "parameters")
        return np.stack([self._batch_grad(batch.subset([j]), w) for j in range(batch.size)])

    def per_sample_hvps(
        self, batch: Batch, w: ParamVector, directions: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        """Hessian-vector products of sample j with direction j, shape (size, d)."""
        check_same_dim(self.dim, w, "parameters")
        return np.stack(
            [self._batch_hvp(batch.subset([j]), w, directions[j]) for j in range(batch.size)]
        )

    @abstractmethod
    def _batch_loss(self, batch: Batch, w: ParamVector) -> float:
        pass

    @abstractmethod
    def _batch_grad(self, batch: Batch, w: ParamVector) -> ParamVector:
        pass

    @abstractmethod
    def _batch_hvp(self, batch: Batch, w: ParamVector, v: ParamVector) -> ParamVector:
        pass

    # Sampling

    def draw_batch(self, size: int, rng: np.random.Generator) -> Batch:
        """Draws `size` i.i.d. samples from the task's distribution p_i. This function acts as an
        alias to the function _draw_batch().

        Args:
            `size` (int): Batch size. Must be positive.
            `rng` (np.random.Generator): Source of randomness.

        Returns:
            Batch: The drawn batch.
        """
        if size < 1:
            raise InvalidArgumentError(f"Batch size must be positive, got {size}")
        return self._draw_batch(size, rng)

    @abstractmethod
    def _draw_batch(self, size: int, rng: np.random.Generator) -> Batch:
        pass

    def initial_point(self, rng: np.random.Generator) -> ParamVector:
        """Starting iterate w_0. Analytic tasks start at the origin."""
        return np.zeros(self.dim)

    # Exact oracles

    @property
    def has_analytic_oracles(self) -> bool:
        return False

    @property
    def has_exact_oracles(self) -> bool:
        return self.has_analytic_oracles or self.evaluation_set is not None

    def exact_loss(self, w: ParamVector) -> float:
        check_same_dim(self.dim, w, "parameters")
        if self.has_analytic_oracles:
            return float(self._exact_loss(w))
        return float(self._batch_loss(self.__require_evaluation_set("exact_loss"), w))

    def exact_grad(self, w: ParamVector) -> ParamVector:
        check_same_dim(self.dim, w, "parameters")
        if self.has_analytic_oracles:
            return self._exact_grad(w)
        return self._batch_grad(self.__require_evaluation_set("exact_grad"), w)

    def exact_hvp(self, w: ParamVector, v: ParamVector) -> ParamVector:
        check_same_dim(self.dim, w, "parameters")
        check_same_dim(self.dim, v, "direction")
        if self.has_analytic_oracles:
            return self._exact_hvp(w, v)
        return self._batch_hvp(self.__require_evaluation_set("exact_hvp"), w, v)

    def exact_hessian(self, w: ParamVector) -> Matrix:
        """Materializes the d x d Hessian column by column. Only meant for small d."""
        columns = [self.exact_hvp(w, unit) for unit in np.eye(self.dim)]
        hessian = np.stack(columns, axis=1)
        return 0.5 * (hessian + hessian.T)

    def _exact_loss(self, w: ParamVector) -> float:
        raise UnsupportedOperationError(f"{self.__class__.__name__} has no analytic loss")

    def _exact_grad(self, w: ParamVector) -> ParamVector:
        raise UnsupportedOperationError(f"{self.__class__.__name__} has no analytic gradient")

    def _exact_hvp(self, w: ParamVector, v: ParamVector) -> ParamVector:
        raise UnsupportedOperationError(
            f"{self.__class__.__name__} has no analytic Hessian-vector product"
        )

    def __require_evaluation_set(self, operation: str) -> Batch:
        if self.__evaluation_set is None:
            logger.debug(f"{self.__class__.__name__} cannot serve {operation}")
            raise UnsupportedOperationError(
                f"{operation} needs an analytic task or an evaluation set, "
                f"{self.__class__.__name__} has neither"
            )
        return self.__evaluation_set

    @property
    def dim(self) -> int:
        return self.__dim

    @property
    def constants(self) -> DeclaredConstants:
        return self.__constants

    @property
    def evaluation_set(self) -> Optional[Batch]:
        return self.__evaluation_set

    @property
    def num_classes(self) -> Optional[int]:
        """Number of classes for classifiers, None for regression-like tasks."""
        return None
