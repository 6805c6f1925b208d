"""Measurements of the quantities the closed-form bounds control, each returned as a
`BoundReport` against its bound."""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.stats import linregress, norm

from perfedavg_simulator.common.constants import MC_CONFIDENCE, MC_MIN_TRIALS
from perfedavg_simulator.common.errors import (
    InvalidArgumentError,
    UnsupportedOperationError,
    numeric_errors,
)
from perfedavg_simulator.common.types import Matrix, ParamVector
from perfedavg_simulator.diagnostics.bound_formulas import BoundFormulas, drift_bounds, theorem_rhs
from perfedavg_simulator.diagnostics.bound_report import BoundReport
from perfedavg_simulator.diagnostics.constant_set import ConstantSet
from perfedavg_simulator.federation.round_data import RoundRecord
from perfedavg_simulator.federation.server import get_executor
from perfedavg_simulator.kernel.rng import Purpose, RngStream
from perfedavg_simulator.kernel.sampling import finite_population_variance, subset_mean_variance
from perfedavg_simulator.metagrad.estimator_config import EstimatorKind, MetaEstimator
from perfedavg_simulator.metagrad.estimators import estimate_meta_grad
from perfedavg_simulator.metagrad.meta_function import meta_grad_exact, meta_objective
from perfedavg_simulator.objective.batch_oracles import ball_points
from perfedavg_simulator.objective.loss_model import LossModel

logger = logging.getLogger(__name__)

History = Sequence[RoundRecord]


def _domain_radius(models: Sequence[LossModel]) -> float:
    radii = [model.constants.radius for model in models if model.constants.radius is not None]
    return min(radii) if radii else 1.0


def exact_quadratic_meta_smoothness(A: Matrix, alpha: float) -> float:
    """Smoothness of the meta-function of a quadratic with Hessian A,
    |(I - alpha A) A (I - alpha A)|_2."""
    P = np.eye(A.shape[0]) - alpha * A
    with numeric_errors("Spectral norm of the meta-Hessian"):
        return float(np.linalg.norm(P @ A @ P, ord=2))


def check_smoothness(
    models: Sequence[LossModel],
    c: ConstantSet,
    trials: int,
    rng: RngStream,
    radius: Optional[float] = None,
) -> BoundReport:
    """Largest ratio |grad F_i(w_1) - grad F_i(w_2)| / |w_1 - w_2| over users and random pairs in
    the ball where the constants hold, against L_F = 4L + alpha rho B.

    Args:
        `models` (Sequence[LossModel]): Tasks with exact oracles.
        `c` (ConstantSet): Needs B, L, rho and alpha.
        `trials` (int): Pairs drawn per user.
        `rng` (RngStream): Stream of the pairs.
        `radius` (Optional[float], optional): Ball radius. Defaults to the smallest declared
            radius of the tasks, or 1.

    Returns:
        BoundReport: The report "meta.smoothness".
    """
    if trials < 1:
        raise InvalidArgumentError(f"Need at least one pair, got {trials}")
    need = "check_smoothness"
    alpha = c.require("alpha", need)
    L, rho, B = c.require("L", need), c.require("rho", need), c.require("B", need)
    L_F = BoundFormulas.meta_smoothness(L, rho, alpha, B)
    radius = _domain_radius(models) if radius is None else radius

    ratio = 0.0
    for index, model in enumerate(models):
        generator = rng.child(Purpose.PROBE, index).generator()
        first = ball_points(trials, model.dim, radius, generator)
        second = ball_points(trials, model.dim, radius, generator)
        for w_1, w_2 in zip(first, second):
            distance = float(np.linalg.norm(w_1 - w_2))
            if distance == 0.0:
                continue
            gap = meta_grad_exact(model, w_1, alpha) - meta_grad_exact(model, w_2, alpha)
            ratio = max(ratio, float(np.linalg.norm(gap)) / distance)
    return BoundReport(
        name="meta.smoothness",
        analytic=L_F,
        measured=ratio,
        trials=trials,
        estimated=c.has_estimates,
        constants=c.as_dict(),
    )


def _analytic_moments(c: ConstantSet, est: MetaEstimator) -> Tuple[float, float]:
    """Bias and second-moment bounds of an estimator. Batch sizes and alpha come from `est`."""
    if est.kind is EstimatorKind.EXACT:
        return 0.0, 0.0
    need = f"{est.kind.value} estimator bounds"
    B, L, sigma_G = c.require("B", need), c.require("L", need), c.require("sigma_G", need)
    alpha, D, D_prime, D_dprime = est.alpha, est.inner_batch, est.outer_batch, est.hessian_batch
    if est.kind is EstimatorKind.STOCHASTIC:
        sigma_H = c.require("sigma_H", need)
        return (
            BoundFormulas.stochastic_bias(alpha, L, sigma_G, D),
            BoundFormulas.stochastic_variance(B, L, alpha, sigma_G, sigma_H, D, D_prime, D_dprime),
        )
    if est.kind is EstimatorKind.FO:
        return (
            BoundFormulas.fo_bias(alpha, L, sigma_G, B, D),
            BoundFormulas.fo_variance(alpha, L, sigma_G, B, D, D_prime),
        )
    rho = c.require("rho", need)
    delta = est.delta if est.delta is not None else c.require("delta", need)
    return (
        BoundFormulas.hf_bias(alpha, L, rho, sigma_G, B, delta, D, D_prime),
        BoundFormulas.hf_variance(alpha, L, rho, sigma_G, B, delta, D, D_prime, D_dprime),
    )


def estimator_errors(
    model: LossModel,
    est: MetaEstimator,
    w: ParamVector,
    trials: int,
    rng: RngStream,
    workers: int = 1,
) -> NDArray[np.float64]:
    """Errors grad~ F_i(w) - grad F_i(w) of `trials` independent estimates, shape (trials, d).
    Trial j draws from the child stream (MONTE_CARLO, j), so the result does not depend on
    `workers`."""
    exact = meta_grad_exact(model, w, est.alpha)

    def work(trial: int) -> ParamVector:
        sample = estimate_meta_grad(model, w, est, rng.child(Purpose.MONTE_CARLO, trial))
        return sample.value - exact

    executor = get_executor(workers)
    if executor is None:
        return np.stack([work(trial) for trial in range(trials)])
    with executor:
        return np.stack(list(executor.map(work, range(trials))))


def check_estimator_moments(
    model: LossModel,
    est: MetaEstimator,
    w: ParamVector,
    mc_trials: int,
    rng: RngStream,
    c: ConstantSet,
    workers: int = 1,
) -> Tuple[BoundReport, BoundReport]:
    """Monte-Carlo bias norm and mean squared error of an estimator at w, against its bounds.

    The bias report's upper confidence bound is |mean error| + z sqrt(tr Cov / N) and the mean
    squared error's is mean + z sd / sqrt(N), with z the one-sided 99% normal quantile.

    Args:
        `model` (LossModel): Task with exact oracles.
        `est` (MetaEstimator): The estimator; any kind.
        `w` (ParamVector): Point of the estimates.
        `mc_trials` (int): Number of independent estimates. Below 1000 the reports are flagged.
        `rng` (RngStream): Stream of the trials.
        `c` (ConstantSet): Problem constants. Batch sizes, alpha and delta come from `est`.
        `workers` (int, optional): Worker threads for the trials.

    Returns:
        Tuple[BoundReport, BoundReport]: Reports "<kind>.bias" and "<kind>.mse".
    """
    if mc_trials < 2:
        raise InvalidArgumentError(f"Need at least two Monte-Carlo trials, got {mc_trials}")
    if mc_trials < MC_MIN_TRIALS:
        logger.warning(f"Only {mc_trials} Monte-Carlo trials, fewer than {MC_MIN_TRIALS}")
    bias_bound, mse_bound = _analytic_moments(c, est)
    errors = estimator_errors(model, est, np.asarray(w, dtype=np.float64), mc_trials, rng, workers)

    z = float(norm.ppf(MC_CONFIDENCE))
    mean_error = errors.mean(axis=0)
    bias = float(np.linalg.norm(mean_error))
    trace_cov = float(np.sum(errors.var(axis=0, ddof=1)))
    squared = np.sum(errors**2, axis=1)
    mse = float(squared.mean())
    mse_sd = float(squared.std(ddof=1))

    context = {
        "w_norm": float(np.linalg.norm(w)),
        "batches": [est.inner_batch, est.outer_batch, est.hessian_batch],
    }
    common = dict(
        trials=mc_trials, estimated=c.has_estimates, constants=c.as_dict(), context=context
    )
    return (
        BoundReport(
            name=f"{est.kind.value}.bias",
            analytic=bias_bound,
            measured=bias,
            ci_upper=bias + z * math.sqrt(trace_cov / mc_trials),
            **common,
        ),
        BoundReport(
            name=f"{est.kind.value}.mse",
            analytic=mse_bound,
            measured=mse,
            ci_upper=mse + z * mse_sd / math.sqrt(mc_trials),
            **common,
        ),
    )


def estimator_error_decay(
    model: LossModel,
    est: MetaEstimator,
    w: ParamVector,
    batch_sizes: Sequence[int],
    mc_trials: int,
    rng: RngStream,
    workers: int = 1,
) -> Dict[str, object]:
    """Bias norm and root mean squared error of an estimator for equal batch sizes D = D' = D''
    over `batch_sizes`, with their log-log slopes against D.

    Returns:
        Dict[str, object]: "batch_sizes", "bias", "rmse", "bias_slope" (None when some bias is
            zero) and "rmse_slope".
    """
    if len(batch_sizes) < 2:
        raise InvalidArgumentError("Need at least two batch sizes to fit a slope")
    bias, rmse = [], []
    for size in batch_sizes:
        sized = MetaEstimator(
            alpha=est.alpha,
            kind=est.kind,
            inner_batch=size,
            outer_batch=size,
            hessian_batch=size,
            delta=est.delta,
        )
        errors = estimator_errors(model, sized, w, mc_trials, rng.child(size), workers)
        bias.append(float(np.linalg.norm(errors.mean(axis=0))))
        rmse.append(float(np.sqrt(np.mean(np.sum(errors**2, axis=1)))))

    log_sizes = np.log(np.asarray(batch_sizes, dtype=np.float64))
    rmse_slope = float(linregress(log_sizes, np.log(rmse)).slope)
    bias_slope = None
    if all(value > 0 for value in bias):
        bias_slope = float(linregress(log_sizes, np.log(bias)).slope)
    return {
        "batch_sizes": list(batch_sizes),
        "bias": bias,
        "rmse": rmse,
        "bias_slope": bias_slope,
        "rmse_slope": rmse_slope,
    }


def check_gamma_F(
    models: Sequence[LossModel], c: ConstantSet, probes: Sequence[ParamVector]
) -> BoundReport:
    """Largest (1/n) sum_i |grad F_i(w) - grad F(w)|^2 over the probe points, against
    gamma_F^2 = 3 B^2 alpha^2 gamma_H^2 + 192 gamma_G^2."""
    if len(probes) == 0:
        raise InvalidArgumentError("Need at least one probe point")
    need = "check_gamma_F"
    alpha = c.require("alpha", need)
    gamma_F_sq = BoundFormulas.meta_dissimilarity(
        c.require("B", need), alpha, c.require("gamma_G", need), c.require("gamma_H", need)
    )
    measured = 0.0
    for w in probes:
        w = np.asarray(w, dtype=np.float64)
        grads = np.stack([meta_grad_exact(model, w, alpha) for model in models])
        deviations = grads - grads.mean(axis=0, keepdims=True)
        measured = max(measured, float(np.mean(np.sum(deviations**2, axis=1))))
    return BoundReport(
        name="meta.dissimilarity",
        analytic=gamma_F_sq,
        measured=measured,
        estimated=c.has_estimates,
        constants=c.as_dict(),
        context={"probes": len(probes)},
    )


def _require_full_traces(history: History) -> None:
    for record in history:
        if record.drift.population != "all":
            raise UnsupportedOperationError(
                f"Round {record.k} traced only active clients; drift checks need all-client traces"
            )


def _drift_reports(
    c: ConstantSet,
    rounds: Sequence[Tuple[int, float]],
    first: NDArray[np.float64],
    second: NDArray[np.float64],
    kind: EstimatorKind,
    seeds: int = 1,
) -> List[BoundReport]:
    reports = []
    for index, (k, beta) in enumerate(rounds):
        c_round = c.with_values(beta=beta) if beta != c.beta else c
        for t in range(first.shape[1]):
            first_bound, second_bound = drift_bounds(c_round, t, kind)
            context = {"k": k, "t": t, "seeds": seeds}
            tags = dict(estimated=c.has_estimates, context=context)
            reports.append(
                BoundReport("drift.first_moment", first_bound, first[index, t], **tags)
            )
            reports.append(
                BoundReport("drift.second_moment", second_bound, second[index, t], **tags)
            )
    return reports


def check_drift(
    history: History, c: ConstantSet, kind: EstimatorKind = EstimatorKind.STOCHASTIC
) -> List[BoundReport]:
    """Client drift moments of one run at every (k, t), against 4 beta t (sigma_F + gamma_F) and
    35 beta^2 t tau (2 sigma_F^2 + gamma_F^2).

    Raises:
        UnsupportedOperationError: If the run did not trace all clients.
        HypothesisViolationError: If beta > 1 / (10 tau L_F).
    """
    return check_drift_over_seeds([history], c, kind)


def check_drift_over_seeds(
    histories: Sequence[History], c: ConstantSet, kind: EstimatorKind = EstimatorKind.STOCHASTIC
) -> List[BoundReport]:
    """Drift moments averaged over runs with different seeds at every (k, t), against their
    bounds. The runs must share K, tau and the stepsize schedule.

    Raises:
        UnsupportedOperationError: If a run did not trace all clients.
    """
    if len(histories) == 0 or any(len(history) == 0 for history in histories):
        raise InvalidArgumentError("Need at least one nonempty history")
    for history in histories:
        _require_full_traces(history)
    first = np.mean([[rec.drift.mean_norm for rec in history] for history in histories], axis=0)
    second = np.mean(
        [[rec.drift.mean_sq_norm for rec in history] for history in histories], axis=0
    )
    rounds = [(record.k, record.beta) for record in histories[0]]
    return _drift_reports(c, rounds, first, second, kind, seeds=len(histories))


def average_stationarity(history: History) -> float:
    """(1/(tau K)) sum_k sum_{t < tau} |grad F(w_bar_{k+1,t})|^2 of one run.

    Raises:
        UnsupportedOperationError: If the run did not track stationarity.
    """
    values = []
    for record in history:
        if not record.stationarity:
            raise UnsupportedOperationError(f"Round {record.k} did not record stationarity")
        values.extend(record.stationarity[:-1])
    return math.fsum(values) / len(values)


def optimality_gap(
    models: Sequence[LossModel], w_0: ParamVector, w_star: ParamVector, alpha: float
) -> float:
    """F(w_0) - F(w_star), clipped at zero."""
    return max(0.0, meta_objective(models, w_0, alpha) - meta_objective(models, w_star, alpha))


def check_theorem(
    histories: Sequence[History],
    c: ConstantSet,
    F0_minus_Fstar: float,
    kind: EstimatorKind = EstimatorKind.STOCHASTIC,
) -> BoundReport:
    """Seed-averaged stationarity of the first tau local steps against
    4 (F(w_0) - F*) / (beta tau K) + 4 sigma_T^2.

    Raises:
        HypothesisViolationError: If beta > 1 / (10 tau L_F).
    """
    if len(histories) == 0:
        raise InvalidArgumentError("Need at least one history")
    analytic = theorem_rhs(c, F0_minus_Fstar, kind)
    measured = math.fsum(average_stationarity(history) for history in histories) / len(histories)
    return BoundReport(
        name="stationarity",
        analytic=analytic,
        measured=measured,
        estimated=c.has_estimates,
        constants=c.as_dict(),
        context={"seeds": len(histories), "kind": EstimatorKind(kind).value, "gap": F0_minus_Fstar},
    )


def check_sampling_identity(
    values: Sequence, m: int, trials: int, rng: RngStream, rel_tol: float = 0.01
) -> BoundReport:
    """Monte-Carlo variance of the mean of a uniform m-subset against sigma^2 (1 - r) / (r (n - 1)),
    two-sided within `rel_tol`."""
    analytic = finite_population_variance(values, m)
    measured = subset_mean_variance(values, m, trials, rng)
    return BoundReport(
        name="sampling.identity",
        analytic=analytic,
        measured=measured,
        trials=trials,
        rel_tol=rel_tol,
        context={"n": len(values), "m": m},
    )
