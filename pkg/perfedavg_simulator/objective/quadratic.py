"""Analytic quadratic tasks with controlled gradient and Hessian noise, and generators of
heterogeneous quadratic federations."""

import logging
from typing import List, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from perfedavg_simulator.common.errors import InvalidArgumentError, numeric_errors
from perfedavg_simulator.common.types import Matrix, ParamVector
from perfedavg_simulator.common.utils import as_param_vector, ensure_finite
from perfedavg_simulator.kernel.rng import RngStream
from perfedavg_simulator.objective.loss_model import DeclaredConstants, LossModel
from perfedavg_simulator.objective.noise import make_matrix_noise, make_noise
from perfedavg_simulator.objective.samples import Batch

logger = logging.getLogger(__name__)

# Largest tolerated asymmetry of a curvature matrix
_SYMMETRY_TOL = 1e-12


class QuadraticTask(LossModel):
    """Quadratic task f(w) = 1/2 w^T A w + b^T w with per-sample loss
    f(w) + xi^T w + 1/2 w^T Xi w, where xi ~ N(0, grad_noise_std^2 I) and Xi is a random
    symmetric matrix with Frobenius norm hess_noise_std.

    A sample's features are the concatenation of xi and the row-major flattening of Xi. Declared
    constants hold on the ball of radius `radius`: L = |A|_2, rho = 0, B = |A|_2 R + |b|,
    sigma_G^2 = d grad_noise_std^2 + hess_noise_std^2 R^2 and sigma_H = hess_noise_std.

    Extends: LossModel
    """

    def __init__(
        self,
        A: ArrayLike,
        b: ArrayLike,
        grad_noise_std: float = 0.0,
        hess_noise_std: float = 0.0,
        radius: float = 1.0,
    ):
        """Initializes an instance of `QuadraticTask`.

        Args:
            `A` (ArrayLike): Symmetric d x d curvature matrix.
            `b` (ArrayLike): Linear term of dimension d.
            `grad_noise_std` (float, optional): Per-coordinate gradient noise std. Defaults to 0.
            `hess_noise_std` (float, optional): Frobenius norm of the Hessian noise. Defaults to 0.
            `radius` (float, optional): Radius of the ball the declared constants hold on.
                Defaults to 1.

        Raises:
            InvalidArgumentError: If A is not square and symmetric, b has the wrong dimension, or
                a noise level or the radius is negative.
        """
        A = np.array(A, dtype=np.float64, ndmin=2)
        b = as_param_vector(np.atleast_1d(b))
        if A.shape != (b.size, b.size):
            raise InvalidArgumentError(f"A must be {b.size} x {b.size}, got {A.shape}")
        ensure_finite(A, "curvature matrix")
        if np.max(np.abs(A - A.T)) > _SYMMETRY_TOL * max(1.0, float(np.max(np.abs(A)))):
            raise InvalidArgumentError("A must be symmetric")
        if grad_noise_std < 0 or hess_noise_std < 0 or radius < 0:
            raise InvalidArgumentError("Noise levels and radius must be nonnegative")

        A = 0.5 * (A + A.T)
        A.flags.writeable = False
        self.__A = A
        self.__b = b
        self.__grad_noise_std = float(grad_noise_std)
        self.__hess_noise_std = float(hess_noise_std)
        self.__radius = float(radius)
        self.__grad_noise = make_noise(b.size, grad_noise_std)
        self.__hess_noise = make_matrix_noise(b.size, hess_noise_std)
        super().__init__(dim=b.size, constants=self._declare_constants())

    def _declare_constants(self) -> DeclaredConstants:
        d = self.__b.size
        with numeric_errors("Spectral norm of A"):
            norm_A = float(np.linalg.norm(self.__A, 2))
        return DeclaredConstants(
            B=norm_A * self.__radius + float(np.linalg.norm(self.__b)),
            L=norm_A,
            rho=0.0,
            sigma_G=float(
                np.sqrt(d * self.__grad_noise_std**2 + (self.__hess_noise_std * self.__radius) ** 2)
            ),
            sigma_H=self.__hess_noise_std,
            radius=self.__radius,
        )

    def _split_features(self, batch: Batch) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
        d = self.dim
        if batch.features.shape[1] != d + d * d:
            raise InvalidArgumentError(
                f"Quadratic samples have {d + d * d} features, got {batch.features.shape[1]}"
            )
        xi = batch.features[:, :d]
        xis = batch.features[:, d:].reshape(batch.size, d, d)
        return xi, xis

    def _draw_batch(self, size: int, rng: np.random.Generator) -> Batch:
        xi = self.__grad_noise.draw(size, rng)
        xis = self.__hess_noise.draw(size, rng)
        return Batch(np.hstack([xi, xis]))

    def _batch_loss(self, batch: Batch, w: ParamVector) -> float:
        xi, xis = self._split_features(batch)
        noise = xi.mean(axis=0) @ w + 0.5 * w @ xis.mean(axis=0) @ w
        return self._exact_loss(w) + float(noise)

    def _batch_grad(self, batch: Batch, w: ParamVector) -> ParamVector:
        xi, xis = self._split_features(batch)
        return (self.__A + xis.mean(axis=0)) @ w + self.__b + xi.mean(axis=0)

    def _batch_hvp(self, batch: Batch, w: ParamVector, v: ParamVector) -> ParamVector:
        _, xis = self._split_features(batch)
        return (self.__A + xis.mean(axis=0)) @ v

    def per_sample_grads(self, batch: Batch, w: ParamVector) -> NDArray[np.float64]:
        xi, xis = self._split_features(batch)
        return (self.__A @ w + self.__b)[np.newaxis, :] + xi + xis @ w

    def per_sample_hvps(
        self, batch: Batch, w: ParamVector, directions: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        _, xis = self._split_features(batch)
        return directions @ self.__A + np.einsum("sij,sj->si", xis, directions)

    @property
    def has_analytic_oracles(self) -> bool:
        return True

    def _exact_loss(self, w: ParamVector) -> float:
        return float(0.5 * w @ self.__A @ w + self.__b @ w)

    def _exact_grad(self, w: ParamVector) -> ParamVector:
        return self.__A @ w + self.__b

    def _exact_hvp(self, w: ParamVector, v: ParamVector) -> ParamVector:
        return self.__A @ v

    def exact_hessian(self, w: ParamVector) -> Matrix:
        return np.array(self.__A)

    @property
    def A(self) -> Matrix:
        return self.__A

    @property
    def b(self) -> ParamVector:
        return self.__b

    @property
    def grad_noise_std(self) -> float:
        return self.__grad_noise_std

    @property
    def hess_noise_std(self) -> float:
        return self.__hess_noise_std

    @property
    def radius(self) -> float:
        return self.__radius


class CubicRegularizedTask(QuadraticTask):
    """Quadratic task plus the cubic regularizer (rho/6)|w|^3, whose Hessian
    (rho/2)(|w| I + w w^T / |w|) is rho-Lipschitz. Used where a known nonzero Hessian Lipschitz
    constant is needed.

    Declared constants on the ball of radius R: L = |A|_2 + rho R, B = |A|_2 R + |b| + rho R^2/2.

    Extends: QuadraticTask
    """

    def __init__(
        self,
        A: ArrayLike,
        b: ArrayLike,
        rho: float,
        grad_noise_std: float = 0.0,
        hess_noise_std: float = 0.0,
        radius: float = 1.0,
    ):
        if rho < 0:
            raise InvalidArgumentError(f"Hessian Lipschitz constant must be nonnegative, got {rho}")
        self.__rho = float(rho)
        super().__init__(A, b, grad_noise_std, hess_noise_std, radius)

    def _declare_constants(self) -> DeclaredConstants:
        base = super()._declare_constants()
        return DeclaredConstants(
            B=base.B + 0.5 * self.__rho * base.radius**2,
            L=base.L + self.__rho * base.radius,
            rho=self.__rho,
            sigma_G=base.sigma_G,
            sigma_H=base.sigma_H,
            radius=base.radius,
        )

    def __cubic_grad(self, w: ParamVector) -> ParamVector:
        return 0.5 * self.__rho * float(np.linalg.norm(w)) * w

    def __cubic_hvp(self, w: ParamVector, v: ParamVector) -> ParamVector:
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return np.zeros_like(v)
        return 0.5 * self.__rho * (norm_w * v + w * (w @ v) / norm_w)

    def _batch_grad(self, batch: Batch, w: ParamVector) -> ParamVector:
        return super()._batch_grad(batch, w) + self.__cubic_grad(w)

    def _batch_hvp(self, batch: Batch, w: ParamVector, v: ParamVector) -> ParamVector:
        return super()._batch_hvp(batch, w, v) + self.__cubic_hvp(w, v)

    def per_sample_grads(self, batch: Batch, w: ParamVector) -> NDArray[np.float64]:
        return super().per_sample_grads(batch, w) + self.__cubic_grad(w)[np.newaxis, :]

    def per_sample_hvps(
        self, batch: Batch, w: ParamVector, directions: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        cubic = np.stack([self.__cubic_hvp(w, v) for v in directions])
        return super().per_sample_hvps(batch, w, directions) + cubic

    def _exact_loss(self, w: ParamVector) -> float:
        return super()._exact_loss(w) + self.__rho / 6.0 * float(np.linalg.norm(w)) ** 3

    def _exact_grad(self, w: ParamVector) -> ParamVector:
        return super()._exact_grad(w) + self.__cubic_grad(w)

    def _exact_hvp(self, w: ParamVector, v: ParamVector) -> ParamVector:
        return super()._exact_hvp(w, v) + self.__cubic_hvp(w, v)

    def exact_hessian(self, w: ParamVector) -> Matrix:
        return LossModel.exact_hessian(self, w)

    @property
    def rho(self) -> float:
        return self.__rho


def _random_symmetric_unit(d: int, rng: np.random.Generator) -> Matrix:
    gaussian = rng.normal(size=(d, d))
    symmetric = 0.5 * (gaussian + gaussian.T)
    return symmetric / np.linalg.norm(symmetric, 2)


def _random_unit(d: int, rng: np.random.Generator) -> ParamVector:
    direction = rng.normal(size=d)
    return direction / np.linalg.norm(direction)


def make_synthetic_federation(
    n: int,
    d: int,
    hetero: Tuple[float, float],
    noise: Tuple[float, float],
    rng: RngStream,
    convex: bool = True,
    eigen_range: Tuple[float, float] = (0.5, 2.0),
    linear_scale: float = 1.0,
    radius: float = 1.0,
) -> List[QuadraticTask]:
    """Builds n quadratic tasks sharing a base (A_0, b_0) with per-user perturbations
    A_i = A_0 + s_H E_i and b_i = b_0 + s_G u_i, where E_i has unit spectral norm and u_i unit
    Euclidean norm. The perturbation directions do not depend on the spread parameters, so the
    dissimilarity of the federation grows monotonically with them.

    Args:
        `n` (int): Number of users, at least 2.
        `d` (int): Parameter dimension, at least 1.
        `hetero` (Tuple[float, float]): Spreads (s_G, s_H) of the linear and curvature terms.
        `noise` (Tuple[float, float]): Per-task (grad_noise_std, hess_noise_std).
        `rng` (RngStream): Stream the federation is drawn from.
        `convex` (bool, optional): Require every A_i to be positive definite. Defaults to True.
        `eigen_range` (Tuple[float, float], optional): Eigenvalue range of A_0. Defaults to
            (0.5, 2.0).
        `linear_scale` (float, optional): Norm of b_0. Defaults to 1.
        `radius` (float, optional): Radius of the ball the declared constants hold on.

    Raises:
        InvalidArgumentError: If n < 2, d < 1, a spread is negative, or the curvature spread
            would break positive definiteness while `convex` is set.

    Returns:
        List[QuadraticTask]: The n tasks.
    """
    grad_spread, hess_spread = hetero
    grad_noise_std, hess_noise_std = noise
    if n < 2 or d < 1:
        raise InvalidArgumentError(f"A synthetic federation needs n >= 2 and d >= 1, got {n}, {d}")
    if grad_spread < 0 or hess_spread < 0:
        raise InvalidArgumentError("Spread parameters must be nonnegative")
    low, high = eigen_range
    if not 0 <= low <= high:
        raise InvalidArgumentError(f"Invalid eigenvalue range {eigen_range}")
    if convex and hess_spread >= low:
        raise InvalidArgumentError(
            f"Curvature spread {hess_spread} must stay below the smallest base eigenvalue {low} "
            "for convex tasks"
        )

    logger.debug(f"Initializing a synthetic federation of {n} quadratic tasks in dimension {d}")
    generator = rng.generator()
    basis, _ = np.linalg.qr(generator.normal(size=(d, d)))
    eigenvalues = generator.uniform(low, high, size=d)
    A_0 = (basis * eigenvalues) @ basis.T
    b_0 = linear_scale * _random_unit(d, generator)

    tasks = []
    for _ in range(n):
        E_i = _random_symmetric_unit(d, generator)
        u_i = _random_unit(d, generator)
        tasks.append(
            QuadraticTask(
                A=A_0 + hess_spread * E_i,
                b=b_0 + grad_spread * u_i,
                grad_noise_std=grad_noise_std,
                hess_noise_std=hess_noise_std,
                radius=radius,
            )
        )
    return tasks
