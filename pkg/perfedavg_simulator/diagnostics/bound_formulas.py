"""Closed-form bounds on the meta-functions, the estimators, client drift and stationarity."""

import math
from dataclasses import asdict, dataclass
from typing import Dict, NamedTuple, Optional, Tuple

from perfedavg_simulator.common.errors import HypothesisViolationError, InvalidArgumentError
from perfedavg_simulator.diagnostics.constant_set import ConstantSet
from perfedavg_simulator.federation.config import admissible_beta
from perfedavg_simulator.metagrad.estimator_config import EstimatorKind


class BoundFormulas:
    """Contains the closed-form expressions every bound check is evaluated with. Arguments are
    plain numbers; `derived_constants` and `theorem_rhs` assemble them from a `ConstantSet`."""

    @staticmethod
    def meta_smoothness(L: float, rho: float, alpha: float, B: float) -> float:
        """Smoothness of every meta-function F_i, L_F = 4L + alpha rho B."""
        return 4.0 * L + alpha * rho * B

    @staticmethod
    def stochastic_variance(
        B: float,
        L: float,
        alpha: float,
        sigma_G: float,
        sigma_H: float,
        D: int,
        D_prime: int,
        D_dprime: int,
    ) -> float:
        """Second moment sigma_F^2 of the stochastic meta-gradient error:
        12 [B^2 + sigma_G^2 (1/D' + (alpha L)^2 / D)] [1 + sigma_H^2 alpha^2 / (4 D'')] - 12 B^2.
        """
        noise = sigma_G**2 * (1.0 / D_prime + (alpha * L) ** 2 / D)
        hessian = 1.0 + sigma_H**2 * alpha**2 / (4.0 * D_dprime)
        return 12.0 * (B**2 + noise) * hessian - 12.0 * B**2

    @staticmethod
    def stochastic_bias(alpha: float, L: float, sigma_G: float, D: int) -> float:
        """Norm bound 2 alpha L sigma_G / sqrt(D) on the mean error of the stochastic estimator."""
        return 2.0 * alpha * L * sigma_G / math.sqrt(D)

    @staticmethod
    def meta_dissimilarity(B: float, alpha: float, gamma_G: float, gamma_H: float) -> float:
        """gamma_F^2 = 3 B^2 alpha^2 gamma_H^2 + 192 gamma_G^2."""
        return 3.0 * B**2 * alpha**2 * gamma_H**2 + 192.0 * gamma_G**2

    @staticmethod
    def fo_bias(alpha: float, L: float, sigma_G: float, B: float, D: int) -> float:
        """m_F^FO = alpha L (sigma_G / sqrt(D) + B)."""
        return alpha * L * (sigma_G / math.sqrt(D) + B)

    @staticmethod
    def fo_variance(
        alpha: float, L: float, sigma_G: float, B: float, D: int, D_prime: int
    ) -> float:
        """(sigma~_F^FO)^2 = 2 sigma_G^2 (1/D' + (alpha L)^2 / D) + 2 (alpha L B)^2."""
        noise = 2.0 * sigma_G**2 * (1.0 / D_prime + (alpha * L) ** 2 / D)
        return noise + 2.0 * (alpha * L * B) ** 2

    @staticmethod
    def hf_bias(
        alpha: float,
        L: float,
        rho: float,
        sigma_G: float,
        B: float,
        delta: float,
        D: int,
        D_prime: int,
    ) -> float:
        """m_F^HF = alpha (2 L sigma_G / sqrt(D) + L sigma_G / sqrt(D') + rho delta B^2)."""
        return alpha * (
            2.0 * L * sigma_G / math.sqrt(D) + L * sigma_G / math.sqrt(D_prime) + rho * delta * B**2
        )

    @staticmethod
    def hf_variance(
        alpha: float,
        L: float,
        rho: float,
        sigma_G: float,
        B: float,
        delta: float,
        D: int,
        D_prime: int,
        D_dprime: int,
    ) -> float:
        """(sigma~_F^HF)^2 =
        6 sigma_G^2 (2 (alpha L)^2 / D + 2 / D' + alpha^2 / (2 delta^2 D''))
        + 2 (alpha rho delta)^2 B^4.
        """
        noise = 2.0 * (alpha * L) ** 2 / D + 2.0 / D_prime + alpha**2 / (2.0 * delta**2 * D_dprime)
        return 6.0 * sigma_G**2 * noise + 2.0 * (alpha * rho * delta) ** 2 * B**4

    @staticmethod
    def drift_first_moment(beta: float, t: int, sigma_F: float, gamma_F: float) -> float:
        """Bound 4 beta t (sigma_F + gamma_F) on the mean distance of a client to the average at
        local step t."""
        return 4.0 * beta * t * (sigma_F + gamma_F)

    @staticmethod
    def drift_second_moment(
        beta: float, t: int, tau: int, sigma_F_sq: float, gamma_F_sq: float
    ) -> float:
        """Bound 35 beta^2 t tau (2 sigma_F^2 + gamma_F^2) on the mean squared distance of a client
        to the average at local step t."""
        return 35.0 * beta**2 * t * tau * (2.0 * sigma_F_sq + gamma_F_sq)

    @staticmethod
    def sampling_factor(n: int, r: float) -> float:
        """(1 - r) / (r (n - 1)), the variance reduction of averaging r n of n users drawn without
        replacement. Zero when every user participates."""
        if n <= 1 or r >= 1.0:
            return 0.0
        return (1.0 - r) / (r * (n - 1))

    @staticmethod
    def stationarity_noise(
        beta: float,
        L_F: float,
        tau: int,
        n: int,
        r: float,
        sigma_F_sq: float,
        gamma_F_sq: float,
        bias_term: float,
    ) -> float:
        """sigma_T^2 = 280 (beta L_F)^2 tau (tau - 1) (2 sigma_F^2 + gamma_F^2)
        + beta L_F (2 sigma_F^2 + gamma_F^2 (1 - r) / (r (n - 1))) + bias_term."""
        spread = 2.0 * sigma_F_sq + gamma_F_sq
        drift = 280.0 * (beta * L_F) ** 2 * tau * (tau - 1) * spread
        sampled = gamma_F_sq * BoundFormulas.sampling_factor(n, r)
        sampling = beta * L_F * (2.0 * sigma_F_sq + sampled)
        return drift + sampling + bias_term

    @staticmethod
    def stationarity_bound(
        F0_minus_Fstar: float, beta: float, tau: int, K: int, sigma_T_sq: float
    ) -> float:
        """4 (F(w_0) - F*) / (beta tau K) + 4 sigma_T^2."""
        return 4.0 * F0_minus_Fstar / (beta * tau * K) + 4.0 * sigma_T_sq


@dataclass(frozen=True)
class DerivedConstants:
    """Constants of the meta-functions derived from the problem constants. The HF entries are None
    when no probe scale delta is known."""

    L_F: float
    sigma_F_sq: float
    gamma_F_sq: float
    m_F_fo: float
    sigma_F_fo_sq: float
    m_F_hf: Optional[float] = None
    sigma_F_hf_sq: Optional[float] = None

    def as_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def derived_constants(c: ConstantSet) -> DerivedConstants:
    """Evaluates L_F, sigma_F^2, gamma_F^2 and the FO and HF bias and variance bounds.

    Raises:
        MissingConstantError: If a base constant is unknown, naming it.
    """
    need = "derived_constants"
    B, L, rho = c.require("B", need), c.require("L", need), c.require("rho", need)
    sigma_G, sigma_H = c.require("sigma_G", need), c.require("sigma_H", need)
    gamma_G, gamma_H = c.require("gamma_G", need), c.require("gamma_H", need)
    alpha = c.require("alpha", need)
    D, D_prime = c.require("D", need), c.require("D_prime", need)
    D_dprime = c.require("D_dprime", need)

    m_F_hf = sigma_F_hf_sq = None
    if c.delta is not None:
        m_F_hf = BoundFormulas.hf_bias(alpha, L, rho, sigma_G, B, c.delta, D, D_prime)
        sigma_F_hf_sq = BoundFormulas.hf_variance(
            alpha, L, rho, sigma_G, B, c.delta, D, D_prime, D_dprime
        )
    return DerivedConstants(
        L_F=BoundFormulas.meta_smoothness(L, rho, alpha, B),
        sigma_F_sq=BoundFormulas.stochastic_variance(
            B, L, alpha, sigma_G, sigma_H, D, D_prime, D_dprime
        ),
        gamma_F_sq=BoundFormulas.meta_dissimilarity(B, alpha, gamma_G, gamma_H),
        m_F_fo=BoundFormulas.fo_bias(alpha, L, sigma_G, B, D),
        sigma_F_fo_sq=BoundFormulas.fo_variance(alpha, L, sigma_G, B, D, D_prime),
        m_F_hf=m_F_hf,
        sigma_F_hf_sq=sigma_F_hf_sq,
    )


def estimator_error_terms(
    c: ConstantSet, derived: DerivedConstants, kind: EstimatorKind
) -> Tuple[float, float]:
    """Second moment of the estimator error and the bias term of sigma_T^2 for an estimator kind.

    First-order and Hessian-free runs use sigma~_F^2 in place of sigma_F^2 and 4 m_F^2 in place of
    4 alpha^2 L^2 sigma_G^2 / D. Exact meta-gradients contribute neither.

    Returns:
        Tuple[float, float]: (error second moment, bias term).
    """
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.EXACT:
        return 0.0, 0.0
    if kind is EstimatorKind.FO:
        return derived.sigma_F_fo_sq, 4.0 * derived.m_F_fo**2
    if kind is EstimatorKind.HF:
        if derived.sigma_F_hf_sq is None:
            c.require("delta", "Hessian-free bounds")
        return derived.sigma_F_hf_sq, 4.0 * derived.m_F_hf**2
    alpha, L = c.require("alpha"), c.require("L")
    bias = BoundFormulas.stochastic_bias(alpha, L, c.require("sigma_G"), c.require("D"))
    return derived.sigma_F_sq, bias**2


def check_stepsize(c: ConstantSet, L_F: float) -> None:
    """Raises HypothesisViolationError if beta exceeds 1 / (10 tau L_F)."""
    need = "the stepsize hypothesis"
    beta, tau = c.require("beta", need), c.require("tau", need)
    if L_F > 0 and beta > admissible_beta(tau, L_F):
        raise HypothesisViolationError(
            f"beta={beta} exceeds 1/(10 tau L_F) = {admissible_beta(tau, L_F)} "
            f"for tau={tau}, L_F={L_F}"
        )


def theorem_rhs(
    c: ConstantSet, F0_minus_Fstar: float, kind: EstimatorKind = EstimatorKind.STOCHASTIC
) -> float:
    """Bound on the average squared meta-gradient norm over the first tau local steps of K rounds,
    4 (F(w_0) - F*) / (beta tau K) + 4 sigma_T^2.

    Args:
        `c` (ConstantSet): Constants of the run.
        `F0_minus_Fstar` (float): Optimality gap of the initial model, nonnegative.
        `kind` (EstimatorKind, optional): Estimator of the run. Selects the error terms.

    Raises:
        HypothesisViolationError: If beta > 1 / (10 tau L_F).
        MissingConstantError: If a constant is unknown, naming it.

    Returns:
        float: The bound.
    """
    if not F0_minus_Fstar >= 0:
        raise InvalidArgumentError(f"F(w_0) - F* must be nonnegative, got {F0_minus_Fstar}")
    derived = derived_constants(c)
    check_stepsize(c, derived.L_F)
    error_sq, bias_term = estimator_error_terms(c, derived, kind)
    need = "theorem_rhs"
    beta, tau, K = c.require("beta", need), c.require("tau", need), c.require("K", need)
    sigma_T_sq = BoundFormulas.stationarity_noise(
        beta,
        derived.L_F,
        tau,
        c.require("n", need),
        c.require("r", need),
        error_sq,
        derived.gamma_F_sq,
        bias_term,
    )
    return BoundFormulas.stationarity_bound(F0_minus_Fstar, beta, tau, K, sigma_T_sq)


def drift_bounds(
    c: ConstantSet, t: int, kind: EstimatorKind = EstimatorKind.STOCHASTIC
) -> Tuple[float, float]:
    """First and second drift-moment bounds at local step t.

    Raises:
        HypothesisViolationError: If beta > 1 / (10 tau L_F).
    """
    derived = derived_constants(c)
    check_stepsize(c, derived.L_F)
    error_sq, _ = estimator_error_terms(c, derived, kind)
    beta, tau = c.require("beta", "drift bounds"), c.require("tau", "drift bounds")
    return (
        BoundFormulas.drift_first_moment(
            beta, t, math.sqrt(error_sq), math.sqrt(derived.gamma_F_sq)
        ),
        BoundFormulas.drift_second_moment(beta, t, tau, error_sq, derived.gamma_F_sq),
    )


class Schedule(NamedTuple):
    tau: int
    K: int
    beta: float


def _ceil(value: float) -> int:
    nearest = round(value)
    if math.isclose(value, nearest, rel_tol=1e-9):
        return int(nearest)
    return math.ceil(value)


def corollary_schedule(epsilon: float) -> Schedule:
    """Local steps, rounds and stepsize that reach an epsilon-stationary point:
    tau = ceil(epsilon^(-1/2)), K = ceil(epsilon^(-3/2)) and beta = epsilon."""
    if not 0.0 < epsilon <= 1.0:
        raise InvalidArgumentError(f"epsilon must lie in (0, 1], got {epsilon}")
    return Schedule(tau=_ceil(epsilon**-0.5), K=_ceil(epsilon**-1.5), beta=epsilon)
