"""Configuration of a meta-gradient estimator and the record of one estimate."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector


class EstimatorKind(Enum):
    EXACT = "exact"
    STOCHASTIC = "stochastic"
    FO = "fo"
    HF = "hf"


@dataclass(frozen=True)
class MetaEstimator:
    """Which estimate of grad F_i(w) a client computes, and with which batch sizes.

    Attributes:
        `alpha` (float): Inner stepsize, nonnegative.
        `kind` (EstimatorKind): Estimator family.
        `inner_batch` (int): Size D of the batch of the inner gradient step.
        `outer_batch` (int): Size D' of the batch of the gradient at the adapted point.
        `hessian_batch` (int): Size D'' of the batch of the Hessian term (stochastic and HF).
        `delta` (Optional[float]): HF probe scale. None selects 1e-3 / max(1, |probe|).
    """

    alpha: float
    kind: EstimatorKind = EstimatorKind.STOCHASTIC
    inner_batch: int = 1
    outer_batch: int = 1
    hessian_batch: int = 1
    delta: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.kind, EstimatorKind):
            object.__setattr__(self, "kind", EstimatorKind(self.kind))
        if not self.alpha >= 0:
            raise InvalidArgumentError(f"alpha must be nonnegative, got {self.alpha}")
        for name in ("inner_batch", "outer_batch", "hessian_batch"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.delta is not None and not self.delta > 0:
            raise InvalidArgumentError(f"delta must be positive, got {self.delta}")

    def validate_against(self, L: Optional[float]) -> None:
        """Checks alpha L <= 1 when the smoothness L is known.

        Raises:
            InvalidArgumentError: If alpha L exceeds one.
        """
        if L is not None and self.alpha * L > 1.0:
            raise InvalidArgumentError(
                f"alpha L <= 1 required, got alpha={self.alpha} and L={L} "
                f"(alpha L = {self.alpha * L})"
            )

    @property
    def uses_hessian_batch(self) -> bool:
        return self.kind in (EstimatorKind.STOCHASTIC, EstimatorKind.HF)


@dataclass(frozen=True)
class MetaGradSample:
    """One estimate of grad F_i(w).

    Attributes:
        `value` (ParamVector): The estimate.
        `inner_point` (ParamVector): w - alpha g, with g the inner gradient estimate used inside
            `value`.
        `batches_used` (Dict[str, int]): Sizes of the batches drawn, by role.
    """

    value: ParamVector
    inner_point: ParamVector
    batches_used: Dict[str, int] = field(default_factory=dict)
