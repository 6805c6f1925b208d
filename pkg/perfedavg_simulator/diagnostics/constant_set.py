"""The constants every closed-form bound is evaluated with, each tagged with where it came from."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional

from perfedavg_simulator.common.errors import InvalidArgumentError, MissingConstantError
from perfedavg_simulator.federation.config import FederationConfig
from perfedavg_simulator.metagrad.estimator_config import MetaEstimator
from perfedavg_simulator.objective.loss_model import DeclaredConstants


class Provenance(Enum):
    DECLARED = "declared"
    ESTIMATED = "estimated"


# Fields of ConstantSet that are bound constants, in reporting order
CONSTANT_NAMES = (
    "B", "L", "rho", "sigma_G", "sigma_H", "gamma_G", "gamma_H",
    "alpha", "beta", "tau", "K", "n", "r", "D", "D_prime", "D_dprime", "delta",
)  # fmt: skip


@dataclass(frozen=True)
class ConstantSet:
    """Problem, heterogeneity and algorithm constants. Unknown constants are None.

    `D`, `D_prime` and `D_dprime` are the inner, outer and Hessian batch sizes. `provenance`
    maps a constant's name to how it was obtained; names it does not list count as declared.
    """

    B: Optional[float] = None
    L: Optional[float] = None
    rho: Optional[float] = None
    sigma_G: Optional[float] = None
    sigma_H: Optional[float] = None
    gamma_G: Optional[float] = None
    gamma_H: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    tau: Optional[int] = None
    K: Optional[int] = None
    n: Optional[int] = None
    r: Optional[float] = None
    D: Optional[int] = None
    D_prime: Optional[int] = None
    D_dprime: Optional[int] = None
    delta: Optional[float] = None
    provenance: Dict[str, Provenance] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in CONSTANT_NAMES:
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise InvalidArgumentError(f"Constant {name} must be nonnegative, got {value}")
        if self.alpha is not None and self.L is not None and self.alpha * self.L > 1.0:
            raise InvalidArgumentError(
                f"alpha L <= 1 required, got alpha={self.alpha} and L={self.L}"
            )
        if self.r is not None and not 0.0 < self.r <= 1.0:
            raise InvalidArgumentError(f"r must lie in (0, 1], got {self.r}")

    def require(self, name: str, needed_by: str = "") -> float:
        """Value of constant `name`.

        Raises:
            MissingConstantError: If the constant is unknown, naming it.
        """
        value = getattr(self, name)
        if value is None:
            raise MissingConstantError(name, needed_by)
        return value

    def provenance_of(self, name: str) -> Provenance:
        return self.provenance.get(name, Provenance.DECLARED)

    @property
    def has_estimates(self) -> bool:
        return any(
            self.provenance_of(name) is Provenance.ESTIMATED
            for name in CONSTANT_NAMES
            if getattr(self, name) is not None
        )

    def with_values(self, provenance: Provenance = Provenance.DECLARED, **values) -> "ConstantSet":
        """A copy with `values` replaced, all tagged with `provenance`."""
        tags = dict(self.provenance)
        tags.update({name: provenance for name in values})
        return replace(self, provenance=tags, **values)

    def as_dict(self) -> Dict[str, Dict[str, object]]:
        return {
            name: {"value": getattr(self, name), "provenance": self.provenance_of(name).value}
            for name in CONSTANT_NAMES
            if getattr(self, name) is not None
        }

    @classmethod
    def from_run(
        cls,
        constants: DeclaredConstants,
        cfg: FederationConfig,
        gamma_G: Optional[float] = None,
        gamma_H: Optional[float] = None,
        provenance: Optional[Dict[str, Provenance]] = None,
    ) -> "ConstantSet":
        """Collects a task's constants, the federation's parameters and its estimator settings."""
        est: MetaEstimator = cfg.estimator
        return cls(
            B=constants.B,
            L=constants.L,
            rho=constants.rho,
            sigma_G=constants.sigma_G,
            sigma_H=constants.sigma_H,
            gamma_G=gamma_G,
            gamma_H=gamma_H,
            alpha=est.alpha,
            beta=cfg.beta.beta0,
            tau=cfg.tau,
            K=cfg.K,
            n=cfg.n,
            r=cfg.r,
            D=est.inner_batch,
            D_prime=est.outer_batch,
            D_dprime=est.hessian_batch,
            delta=est.delta,
            provenance=dict(provenance or {}),
        )

