"""Tasks sharing one per-sample loss over a finite support, differing only in their sample
distribution."""

import numpy as np
from numpy.typing import ArrayLike, NDArray

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.objective.loss_model import DeclaredConstants, LossModel
from perfedavg_simulator.objective.samples import Batch

# Hessian Lipschitz bound of the pseudo-Huber loss, in both w and z
PSEUDO_HUBER_RHO = 2.0


class PseudoHuberMixtureTask(LossModel):
    """Task with per-sample loss l(w; z) = sqrt(1 + |w - z|^2) and z drawn from a finite support
    with user-specific masses.

    The per-sample gradient (w - z)/s and Hessian (I - u u^T/s^2)/s, with u = w - z and
    s = sqrt(1 + |u|^2), have norms at most 1 everywhere, and both are 1-Lipschitz in z. The
    declared constants are therefore global: B = L = sigma_G = sigma_H = 1, rho = 2.

    Extends: LossModel
    """

    def __init__(self, support: ArrayLike, mass: ArrayLike):
        """Initializes an instance of `PseudoHuberMixtureTask`.

        Args:
            `support` (ArrayLike): Support points z_j, shape (k, d) or (k,) for d = 1.
            `mass` (ArrayLike): Probability of each support point.

        Raises:
            InvalidArgumentError: If the masses are negative, do not sum to one, or do not match
                the support.
        """
        support = np.asarray(support, dtype=np.float64)
        if support.ndim == 1:
            support = support[:, np.newaxis]
        mass = np.asarray(mass, dtype=np.float64).reshape(-1)
        if support.ndim != 2 or support.shape[0] != mass.size or mass.size == 0:
            raise InvalidArgumentError("Support and mass must describe the same nonempty set")
        if np.any(mass < 0) or abs(float(mass.sum()) - 1.0) > 1e-12:
            raise InvalidArgumentError("Masses must be nonnegative and sum to one")
        self.__support = support
        self.__mass = mass
        super().__init__(
            dim=support.shape[1],
            constants=DeclaredConstants(
                B=1.0, L=1.0, rho=PSEUDO_HUBER_RHO, sigma_G=1.0, sigma_H=1.0, radius=None
            ),
        )

    @staticmethod
    def sample_grad(w: ParamVector, z: ParamVector) -> ParamVector:
        u = w - z
        return u / np.sqrt(1.0 + u @ u)

    @staticmethod
    def sample_hvp(w: ParamVector, z: ParamVector, v: ParamVector) -> ParamVector:
        u = w - z
        s_sq = 1.0 + u @ u
        s = np.sqrt(s_sq)
        return (v - u * (u @ v) / s_sq) / s

    def __weighted_grad(self, points: NDArray[np.float64], weights: NDArray[np.float64], w):
        u = w[np.newaxis, :] - points
        s = np.sqrt(1.0 + np.sum(u**2, axis=1))
        return weights @ (u / s[:, np.newaxis])

    def __weighted_hvp(self, points, weights, w, v):
        u = w[np.newaxis, :] - points
        s_sq = 1.0 + np.sum(u**2, axis=1)
        s = np.sqrt(s_sq)
        terms = (v[np.newaxis, :] - u * ((u @ v) / s_sq)[:, np.newaxis]) / s[:, np.newaxis]
        return weights @ terms

    def __weighted_loss(self, points, weights, w) -> float:
        u = w[np.newaxis, :] - points
        return float(weights @ np.sqrt(1.0 + np.sum(u**2, axis=1)))

    def __uniform(self, batch: Batch) -> NDArray[np.float64]:
        return np.full(batch.size, 1.0 / batch.size)

    def _draw_batch(self, size: int, rng: np.random.Generator) -> Batch:
        chosen = rng.choice(self.__mass.size, size=size, p=self.__mass)
        return Batch(self.__support[chosen], chosen)

    def _batch_loss(self, batch: Batch, w: ParamVector) -> float:
        return self.__weighted_loss(batch.features, self.__uniform(batch), w)

    def _batch_grad(self, batch: Batch, w: ParamVector) -> ParamVector:
        return self.__weighted_grad(batch.features, self.__uniform(batch), w)

    def _batch_hvp(self, batch: Batch, w: ParamVector, v: ParamVector) -> ParamVector:
        return self.__weighted_hvp(batch.features, self.__uniform(batch), w, v)

    @property
    def has_analytic_oracles(self) -> bool:
        return True

    def _exact_loss(self, w: ParamVector) -> float:
        return self.__weighted_loss(self.__support, self.__mass, w)

    def _exact_grad(self, w: ParamVector) -> ParamVector:
        return self.__weighted_grad(self.__support, self.__mass, w)

    def _exact_hvp(self, w: ParamVector, v: ParamVector) -> ParamVector:
        return self.__weighted_hvp(self.__support, self.__mass, w, v)

    @property
    def support(self) -> NDArray[np.float64]:
        return self.__support

    @property
    def mass(self) -> NDArray[np.float64]:
        return self.__mass
