"""Subcommands of the command line interface. Each builds the federation a run spec describes,
runs its part of the pipeline and writes the run's artifacts into the output directory."""

import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import IntEnum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy
import yaml
from scipy.stats import t as student_t

from perfedavg_simulator.cli.run_spec import DATASET_FAMILIES, RunSpec
from perfedavg_simulator.common.constants import (
    DEFAULT_BETA,
    ENV_VARS,
    HF_DELTA_SCALE,
    MLP_HIDDEN_WIDTHS,
    NUM_CLASSES,
    OUTPUT_FILES,
    SUMMARY_CONFIDENCE,
)
from perfedavg_simulator.common.errors import (
    ConfigError,
    DataError,
    HypothesisViolationError,
    MissingConstantError,
    numeric_errors,
)
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.common.utils import atomic_write_text, round_half_up
from perfedavg_simulator.diagnostics.bound_formulas import BoundFormulas, derived_constants
from perfedavg_simulator.diagnostics.bound_report import (
    BoundReport,
    condense,
    render_table,
    write_reports_json,
)
from perfedavg_simulator.diagnostics.checks import (
    check_drift_over_seeds,
    check_estimator_moments,
    check_gamma_F,
    check_smoothness,
    check_theorem,
    optimality_gap,
)
from perfedavg_simulator.diagnostics.constant_set import ConstantSet, Provenance
from perfedavg_simulator.federation.closed_form import minimize_F_closed_form
from perfedavg_simulator.federation.config import (
    Algorithm,
    BetaSchedule,
    FederationConfig,
    admissible_beta,
)
from perfedavg_simulator.federation.output import (
    JsonLinesWriter,
    RoundLogWriter,
    write_json,
    write_model_blob,
)
from perfedavg_simulator.federation.personalization import (
    PersonalizationResult,
    evaluate_personalization,
)
from perfedavg_simulator.federation.round_data import RoundRecord
from perfedavg_simulator.federation.server import FederationServer
from perfedavg_simulator.heterogeneity.distributions import DiscreteDistribution
from perfedavg_simulator.heterogeneity.partition import (
    PartitionSpec,
    UserData,
    partition_train_test,
    write_partition_csv,
)
from perfedavg_simulator.heterogeneity.similarity import (
    SimilarityReport,
    build_similarity_report,
    exact_quadratic_gammas,
    write_similarity_report,
)
from perfedavg_simulator.kernel.rng import Purpose, RngStream, Scope
from perfedavg_simulator.metagrad.estimator_config import EstimatorKind, MetaEstimator
from perfedavg_simulator.metagrad.meta_function import meta_gradient, meta_objective
from perfedavg_simulator.objective.batch_oracles import ball_points, estimate_constants
from perfedavg_simulator.objective.datasets import (
    build_user_models,
    load_mnist,
    make_gaussian_classes,
)
from perfedavg_simulator.objective.loss_model import DeclaredConstants, LossModel
from perfedavg_simulator.objective.quadratic import (
    CubicRegularizedTask,
    QuadraticTask,
    make_synthetic_federation,
)
from perfedavg_simulator.objective.samples import Batch

logger = logging.getLogger(__name__)

# Share of the synthetic gaussian pool held out for testing when no test ratio is configured
_GAUSSIAN_TEST_SHARE = 0.25

# Radius of the probe ball around the initial point of dataset tasks
_DATASET_PROBE_RADIUS = 1.0

# Rows of the comparison table: label, algorithm and Per-FedAvg estimator
COMPARE_VARIANTS = (
    ("fedavg", Algorithm.FEDAVG, EstimatorKind.FO),
    ("perfedavg-fo", Algorithm.PER_FEDAVG, EstimatorKind.FO),
    ("perfedavg-hf", Algorithm.PER_FEDAVG, EstimatorKind.HF),
)


class _Stage(IntEnum):
    """Stream tags of the diagnostic stages, below (DIAGNOSTICS, MONTE_CARLO)."""

    PROBES = 0
    CONSTANTS = 1
    SMOOTHNESS = 2
    ESTIMATORS = 3
    SIMILARITY = 4


@dataclass
class Federation:
    """The users of one run.

    Attributes:
        `train_models` (List[LossModel]): Every user's training task.
        `test_models` (List[LossModel]): Every user's personalization task. Quadratic users are
            personalized on fresh draws of their own task.
        `constants` (Optional[DeclaredConstants]): Constants valid for every user, None for
            dataset tasks that declare none.
        `partition` (Optional[List[UserData]]): Training sample assignment of dataset tasks.
        `test_partition` (Optional[List[UserData]]): Test sample assignment of dataset tasks.
    """

    train_models: List[LossModel]
    test_models: List[LossModel]
    constants: Optional[DeclaredConstants] = None
    partition: Optional[List[UserData]] = field(default=None, repr=False)
    test_partition: Optional[List[UserData]] = field(default=None, repr=False)

    @property
    def is_quadratic(self) -> bool:
        return all(
            isinstance(model, QuadraticTask) and not isinstance(model, CubicRegularizedTask)
            for model in self.train_models
        )

    def label_distributions(self) -> List[DiscreteDistribution]:
        if self.partition is None:
            return []
        classes = np.arange(NUM_CLASSES, dtype=np.float64)
        return [
            DiscreteDistribution(classes, user.class_counts / user.class_counts.sum())
            for user in self.partition
        ]


def combine_constants(per_user: Sequence[DeclaredConstants]) -> DeclaredConstants:
    """Constants valid for every user: the largest value of each constant on the smallest
    radius. A constant some user leaves unknown stays unknown."""
    tables = [constants.as_dict() for constants in per_user]
    combined = {}
    for name in tables[0]:
        values = [table[name] for table in tables]
        if any(value is None for value in values):
            combined[name] = None
        else:
            combined[name] = min(values) if name == "radius" else max(values)
    return DeclaredConstants(**combined)


def _mnist_dir(spec: RunSpec) -> str:
    directory = spec.task.mnist_dir or os.environ.get(ENV_VARS.MNIST_DIR)
    if not directory:
        raise DataError(
            f"No MNIST directory configured: set task.mnist_dir or {ENV_VARS.MNIST_DIR}"
        )
    return directory


def _gaussian_splits(spec: RunSpec, rng: RngStream) -> Tuple[Batch, Batch]:
    """Train and test pools drawn around the same class means."""
    ratio = spec.partition.test_ratio
    if ratio is None:
        ratio = _GAUSSIAN_TEST_SHARE
    per_class = spec.task.per_class
    test_per_class = max(1, round_half_up(per_class * ratio))
    pool = make_gaussian_classes(per_class + test_per_class, spec.task.feature_dim, rng)
    position = np.tile(np.arange(per_class + test_per_class), NUM_CLASSES)
    held_out = position >= per_class
    return pool.subset(np.flatnonzero(~held_out)), pool.subset(np.flatnonzero(held_out))


def _quadratic_federation(spec: RunSpec, setup: RngStream) -> Federation:
    task = spec.task
    tasks = make_synthetic_federation(
        spec.federation.n,
        task.dim,
        hetero=(task.grad_spread, task.hess_spread),
        noise=(task.grad_noise, task.hess_noise),
        rng=setup.child(Purpose.FEDERATION),
        eigen_range=(task.eigen_low, task.eigen_high),
        linear_scale=task.linear_scale,
        radius=task.radius,
    )
    return Federation(
        train_models=list(tasks),
        test_models=list(tasks),
        constants=combine_constants([model.constants for model in tasks]),
    )


def _dataset_federation(spec: RunSpec, setup: RngStream) -> Federation:
    task, part = spec.task, spec.partition
    if task.family == "logistic":
        train, test = _gaussian_splits(spec, setup.child(Purpose.DATA))
        hidden = task.hidden or ()
    else:
        train, test = load_mnist(_mnist_dir(spec))
        hidden = task.hidden if task.hidden is not None else MLP_HIDDEN_WIDTHS
    widths = (train.features.shape[1], *hidden, NUM_CLASSES)

    layout = PartitionSpec(spec.federation.n, part.a, part.diff_hetero)
    train_users, test_users = partition_train_test(
        train.labels, test.labels, layout, setup.child(Purpose.PARTITION), part.test_ratio
    )
    logger.debug(f"Initializing {len(train_users)} networks with widths {widths}")
    return Federation(
        train_models=build_user_models(train, [user.indices for user in train_users], widths),
        test_models=build_user_models(test, [user.indices for user in test_users], widths),
        partition=train_users,
        test_partition=test_users,
    )


def build_federation(spec: RunSpec) -> Federation:
    """Builds the users a run spec describes, reproducibly from its seed.

    Raises:
        DataError: If dataset files are missing or malformed.
        DataShortageError: If a class holds too few samples for the partition.
    """
    setup = RngStream.from_seed(spec.seed).child(Scope.SETUP)
    if spec.task.family in DATASET_FAMILIES:
        federation = _dataset_federation(spec, setup)
    else:
        federation = _quadratic_federation(spec, setup)
    if spec.task.declared_L is not None:
        base = federation.constants or DeclaredConstants()
        federation.constants = replace(base, L=spec.task.declared_L)
    return federation


def declared_meta_smoothness(spec: RunSpec, federation: Federation) -> Optional[float]:
    """L_F = 4L + alpha rho B from the federation's declared constants, None if any is unknown
    or the algorithm is not Per-FedAvg."""
    constants = federation.constants
    if spec.federation.algorithm != Algorithm.PER_FEDAVG.value or constants is None:
        return None
    if constants.L is None or constants.rho is None or constants.B is None:
        return None
    return BoundFormulas.meta_smoothness(
        constants.L, constants.rho, spec.estimator.alpha, constants.B
    )


def resolve_beta(spec: RunSpec, L_F: Optional[float] = None) -> float:
    """The configured outer stepsize, else 1 / (10 tau L_F) when L_F is known, else
    DEFAULT_BETA."""
    if spec.federation.beta is not None:
        return spec.federation.beta
    if L_F is not None and L_F > 0:
        return admissible_beta(spec.federation.tau, L_F)
    return DEFAULT_BETA


def federation_config(
    spec: RunSpec, workers: int = 1, L_F: Optional[float] = None, **overrides: Any
) -> FederationConfig:
    """The federation parameters of a run spec. `overrides` replace fields of the result.

    Raises:
        HypothesisViolationError: If `L_F` is given and beta exceeds 1 / (10 tau L_F).
    """
    fed, est = spec.federation, spec.estimator
    cfg = FederationConfig(
        n=fed.n,
        r=fed.r,
        tau=fed.tau,
        K=fed.rounds,
        beta=BetaSchedule(resolve_beta(spec, L_F), fed.schedule),
        estimator=MetaEstimator(
            alpha=est.alpha,
            kind=est.kind,
            inner_batch=est.inner_batch,
            outer_batch=est.outer_batch,
            hessian_batch=est.hessian_batch,
            delta=est.delta,
        ),
        algorithm=fed.algorithm,
        seed=spec.seed,
        workers=workers,
        trace_all_clients=fed.trace_all_clients,
        retain_models=False,
        L_F=L_F if L_F is not None and L_F > 0 else None,
    )
    return replace(cfg, **overrides) if overrides else cfg


def with_kind(
    cfg: FederationConfig, kind: EstimatorKind, algorithm: Optional[Algorithm] = None
) -> FederationConfig:
    estimator = replace(cfg.estimator, kind=kind)
    return replace(cfg, estimator=estimator, algorithm=algorithm or cfg.algorithm)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_metadata(
    out_dir: str,
    command: str,
    spec: RunSpec,
    started: str,
    extra: Optional[Dict[str, Any]] = None,
) -> None:
    """Writes the wall-clock and environment details, the only outputs that differ between
    replays."""
    payload = {
        "command": command,
        "started": started,
        "finished": _timestamp(),
        "spec": yaml.safe_load(yaml.safe_dump(spec.to_dict())),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__},
    }
    if extra:
        payload.update(extra)
    write_json(os.path.join(out_dir, OUTPUT_FILES.METADATA), payload)


def train_logged(
    federation: Federation, cfg: FederationConfig, out_dir: str, w_0: Optional[ParamVector] = None
) -> List[RoundRecord]:
    """Trains while streaming the round log and the per-round wall-clock timings to `out_dir`."""
    round_path = os.path.join(out_dir, OUTPUT_FILES.ROUND_LOG)
    timing_path = os.path.join(out_dir, OUTPUT_FILES.TIMINGS)
    with RoundLogWriter(round_path) as round_log, JsonLinesWriter(timing_path) as timing_log:
        clock = time.perf_counter()

        def on_round(record: RoundRecord) -> None:
            nonlocal clock
            round_log(record)
            now = time.perf_counter()
            timing_log.write({"k": record.k, "seconds": now - clock})
            clock = now

        return FederationServer(federation.train_models, cfg).run_training(w_0, on_round)


def personalize_federation(
    spec: RunSpec, federation: Federation, w: ParamVector
) -> PersonalizationResult:
    rng = RngStream.from_seed(spec.seed).child(Scope.DIAGNOSTICS, Purpose.PERSONALIZE)
    return evaluate_personalization(
        federation.test_models, w, spec.estimator.alpha, spec.diagnostics.personalization_batch, rng
    )


def mean_interval(
    values: Sequence[float], confidence: float = SUMMARY_CONFIDENCE
) -> Tuple[float, Optional[float]]:
    """Mean and half-width of the Student-t confidence interval of `values`. The half-width is
    None for fewer than two values."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, None
    quantile = float(student_t.ppf(0.5 + confidence / 2.0, df=values.size - 1))
    return mean, quantile * float(values.std(ddof=1)) / math.sqrt(values.size)


@dataclass(frozen=True)
class SummaryRow:
    """One algorithm's personalized loss and accuracy, with confidence half-widths."""

    label: str
    loss: float
    loss_half_width: Optional[float]
    accuracy: Optional[float] = None
    accuracy_half_width: Optional[float] = None
    samples: int = 1

    @classmethod
    def from_values(
        cls, label: str, losses: Sequence[float], accuracies: Optional[Sequence[float]] = None
    ) -> "SummaryRow":
        loss, loss_half = mean_interval(losses)
        accuracy, accuracy_half = (None, None) if not accuracies else mean_interval(accuracies)
        return cls(label, loss, loss_half, accuracy, accuracy_half, len(losses))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "loss": self.loss,
            "loss_half_width": self.loss_half_width,
            "accuracy": self.accuracy,
            "accuracy_half_width": self.accuracy_half_width,
            "samples": self.samples,
        }


def _with_interval(
    value: float, half_width: Optional[float], scale: float = 1.0, unit: str = ""
) -> str:
    if half_width is None:
        return f"{value * scale:.4f}{unit}"
    return f"{value * scale:.4f}{unit} +/- {half_width * scale:.4f}{unit}"


def render_summary(rows: Sequence[SummaryRow], over: str) -> str:
    """Fixed-width table of post-personalization loss and accuracy, with intervals over `over`."""
    header = f"{'algorithm':<16} {'loss':>28} {'accuracy':>28}"
    title = f"Post-personalization results, {SUMMARY_CONFIDENCE:.0%} intervals over {over}"
    lines = [title, header, "-" * len(header)]
    for row in rows:
        loss = _with_interval(row.loss, row.loss_half_width)
        accuracy = "n/a"
        if row.accuracy is not None:
            accuracy = _with_interval(row.accuracy, row.accuracy_half_width, 100.0, "%")
        lines.append(f"{row.label:<16} {loss:>28} {accuracy:>28}")
    return "\n".join(lines) + "\n"


def _algorithm_label(cfg: FederationConfig) -> str:
    if cfg.algorithm is Algorithm.FEDAVG:
        return "fedavg"
    return f"perfedavg-{cfg.estimator.kind.value}"


def run_train(spec: RunSpec, out_dir: str, workers: int = 1) -> Dict[str, Any]:
    """Trains the configured algorithm and writes the round log, the final model, the timings,
    the summary table and, for dataset tasks, the partition.

    Raises:
        InvalidArgumentError: If alpha L exceeds one for the federation's declared L.
        HypothesisViolationError: If beta exceeds 1 / (10 tau L_F) for declared constants.
        NumericError: If a non-finite value appears during training.
    """
    started = _timestamp()
    os.makedirs(out_dir, exist_ok=True)
    federation = build_federation(spec)
    cfg = federation_config(spec, workers, declared_meta_smoothness(spec, federation))
    if federation.constants is not None:
        cfg.estimator.validate_against(federation.constants.L)
    if federation.partition is not None and spec.output.write_partition:
        write_partition_csv(os.path.join(out_dir, OUTPUT_FILES.PARTITION), federation.partition)

    history = train_logged(federation, cfg, out_dir)
    w_final = history[-1].server_model
    write_model_blob(os.path.join(out_dir, OUTPUT_FILES.MODEL_BLOB), w_final)

    final_gradient = meta_gradient(federation.train_models, w_final, spec.estimator.alpha)
    final_stationarity = float(np.dot(final_gradient, final_gradient))
    result = personalize_federation(spec, federation, w_final)
    row = SummaryRow.from_values(_algorithm_label(cfg), result.losses, result.accuracies)
    summary = render_summary([row], over=f"{len(result.losses)} users")
    summary += f"final |grad F|^2 = {final_stationarity:.6g}\n"
    atomic_write_text(os.path.join(out_dir, OUTPUT_FILES.SUMMARY), summary)
    logger.info(
        f"Training done: final |grad F|^2 = {final_stationarity:.6g}, "
        f"mean personalized loss {row.loss:.6g}"
    )

    outcome = {
        "final_stationarity": final_stationarity,
        "summary": row.to_dict(),
        "rounds": len(history),
    }
    write_metadata(out_dir, "train", spec, started, {"outcome": outcome})
    return outcome


def probe_points(
    spec: RunSpec, federation: Federation, w_0: ParamVector, count: int, rng: RngStream
) -> List[ParamVector]:
    """The initial point followed by `count - 1` uniform points of the ball the constants refer
    to: the declared ball around the origin for quadratic tasks, a unit ball around the initial
    point otherwise."""
    dim = federation.train_models[0].dim
    generator = rng.generator()
    if federation.is_quadratic:
        others = ball_points(count - 1, dim, spec.task.radius, generator)
    else:
        others = w_0 + ball_points(count - 1, dim, _DATASET_PROBE_RADIUS, generator)
    return [np.asarray(w_0, dtype=np.float64), *others]


def _similarity(
    spec: RunSpec, federation: Federation, probes: Sequence[ParamVector], rng: RngStream
) -> SimilarityReport:
    if federation.is_quadratic:
        gamma_G_sq, gamma_H_sq = exact_quadratic_gammas(federation.train_models, spec.task.radius)
        return SimilarityReport(gamma_G_sq, gamma_H_sq)
    distributions = federation.label_distributions()
    return build_similarity_report(federation.train_models, distributions, probes, rng)


def build_constant_set(
    spec: RunSpec,
    federation: Federation,
    cfg: FederationConfig,
    probes: Sequence[ParamVector],
    similarity: SimilarityReport,
    rng: RngStream,
) -> ConstantSet:
    """Constants of the run. Tasks without declared constants get sampled estimates, and
    everything except a declared L is then tagged as estimated."""
    provenance: Dict[str, Provenance] = {}
    constants = federation.constants
    if constants is None or constants.B is None:
        points = list(probes) if len(probes) >= 2 else [*probes, probes[0] + 1.0]
        models = federation.train_models
        logger.info(f"Estimating constants of {len(models)} users at {len(points)} probes")
        estimates = [
            estimate_constants(model, points, rng.child(user)) for user, model in enumerate(models)
        ]
        constants = combine_constants(estimates)
        if spec.task.declared_L is not None:
            constants = replace(constants, L=spec.task.declared_L)
        estimated = ("B", "L", "rho", "sigma_G", "sigma_H")
        provenance = {name: Provenance.ESTIMATED for name in estimated}
        if spec.task.declared_L is not None:
            provenance["L"] = Provenance.DECLARED
    if not federation.is_quadratic:
        provenance.update(gamma_G=Provenance.ESTIMATED, gamma_H=Provenance.ESTIMATED)
    gamma_G, gamma_H = math.sqrt(similarity.gamma_G_sq), math.sqrt(similarity.gamma_H_sq)
    return ConstantSet.from_run(constants, cfg, gamma_G, gamma_H, provenance)


def _estimator_reports(
    spec: RunSpec,
    federation: Federation,
    cfg: FederationConfig,
    c: ConstantSet,
    w: ParamVector,
    rng: RngStream,
    workers: int,
) -> List[BoundReport]:
    kinds = [EstimatorKind.STOCHASTIC, EstimatorKind.FO, EstimatorKind.HF]
    if cfg.estimator.kind is EstimatorKind.EXACT:
        kinds.insert(0, EstimatorKind.EXACT)
    reports: List[BoundReport] = []
    for kind in kinds:
        est = replace(cfg.estimator, kind=kind)
        if kind is EstimatorKind.HF and est.delta is None:
            est = replace(est, delta=HF_DELTA_SCALE)
        logger.debug(f"Checking the {kind.value} estimator at w_0")
        reports.extend(
            check_estimator_moments(
                federation.train_models[0],
                est,
                w,
                spec.diagnostics.mc_trials,
                rng.child(list(EstimatorKind).index(kind)),
                c,
                workers,
            )
        )
    return reports


def _training_reports(
    spec: RunSpec,
    federation: Federation,
    cfg: FederationConfig,
    c: ConstantSet,
    w_0: ParamVector,
) -> List[BoundReport]:
    """Seed-averaged drift and stationarity checks over `diagnostics.seeds` full-trace runs."""
    kind = cfg.estimator.kind
    if federation.is_quadratic:
        w_star = minimize_F_closed_form(federation.train_models, cfg.estimator.alpha)
        gap = optimality_gap(federation.train_models, w_0, w_star, cfg.estimator.alpha)
    else:
        # cross-entropy is nonnegative, so F(w_0) bounds the gap from above
        gap = meta_objective(federation.train_models, w_0, cfg.estimator.alpha)

    histories = []
    for offset in range(spec.diagnostics.seeds):
        seeded = replace(
            cfg, seed=spec.seed + offset, trace_all_clients=True, track_stationarity=True
        )
        histories.append(FederationServer(federation.train_models, seeded).run_training(w_0))
    logger.info(f"Ran {len(histories)} full-trace seeds for the drift and stationarity checks")
    reports = check_drift_over_seeds(histories, c, kind)
    reports.append(check_theorem(histories, c, gap, kind))
    return reports


def run_diagnose(spec: RunSpec, out_dir: str, workers: int = 1) -> List[BoundReport]:
    """Measures every bounded quantity of the configured federation and writes the reports to
    the diagnostics JSON, printing a condensed table.

    Seed-level checks are skipped with a warning when the algorithm is FedAvg, when a constant
    they need is unknown, or when beta violates the stepsize hypothesis under estimated
    constants.

    Raises:
        HypothesisViolationError: If beta exceeds 1 / (10 tau L_F) under declared constants.
    """
    started = _timestamp()
    os.makedirs(out_dir, exist_ok=True)
    federation = build_federation(spec)
    cfg = federation_config(spec, workers, declared_meta_smoothness(spec, federation))
    root = cfg.root_stream.child(Scope.DIAGNOSTICS, Purpose.MONTE_CARLO)
    w_0 = FederationServer(federation.train_models, cfg).initial_point()
    probes = probe_points(
        spec, federation, w_0, spec.diagnostics.probes, root.child(_Stage.PROBES)
    )

    similarity = _similarity(spec, federation, probes, root.child(_Stage.SIMILARITY))
    c = build_constant_set(spec, federation, cfg, probes, similarity, root.child(_Stage.CONSTANTS))
    derived = derived_constants(c)
    radius = spec.task.radius if federation.is_quadratic else None

    models, pairs = federation.train_models, spec.diagnostics.smoothness_pairs
    reports = [check_smoothness(models, c, pairs, root.child(_Stage.SMOOTHNESS), radius)]
    estimators = root.child(_Stage.ESTIMATORS)
    reports.extend(_estimator_reports(spec, federation, cfg, c, w_0, estimators, workers))
    reports.append(check_gamma_F(models, c, probes))

    skipped: Dict[str, str] = {}
    if cfg.algorithm is Algorithm.FEDAVG:
        skipped["training"] = "drift and stationarity bounds cover Per-FedAvg only"
    else:
        try:
            reports.extend(_training_reports(spec, federation, cfg, c, w_0))
        except MissingConstantError as error:
            skipped["training"] = str(error)
        except HypothesisViolationError as error:
            if not c.has_estimates:
                raise
            skipped["training"] = str(error)
    for reason in skipped.values():
        logger.warning(f"Skipping the drift and stationarity checks: {reason}")

    write_reports_json(
        os.path.join(out_dir, OUTPUT_FILES.DIAGNOSTICS),
        reports,
        extra={
            "constants": c.as_dict(),
            "derived": derived.as_dict(),
            "similarity": similarity.to_dict(),
            "skipped": skipped,
        },
    )
    table = render_table(condense(reports))
    atomic_write_text(os.path.join(out_dir, OUTPUT_FILES.SUMMARY), table)
    print(table, end="")
    write_metadata(out_dir, "diagnose", spec, started, {"reports": len(reports)})
    return reports


def run_partition(spec: RunSpec, out_dir: str, workers: int = 1) -> SimilarityReport:
    """Partitions a dataset task, writes the assignment CSV and the similarity report.

    Raises:
        ConfigError: If the task family has no dataset to partition.
    """
    if spec.task.family not in DATASET_FAMILIES:
        raise ConfigError(
            f"the partition command needs one of {DATASET_FAMILIES}", field="task.family"
        )
    started = _timestamp()
    os.makedirs(out_dir, exist_ok=True)
    federation = build_federation(spec)
    write_partition_csv(os.path.join(out_dir, OUTPUT_FILES.PARTITION), federation.partition)

    cfg = federation_config(spec, workers)
    root = cfg.root_stream.child(Scope.DIAGNOSTICS, Purpose.MONTE_CARLO)
    w_0 = FederationServer(federation.train_models, cfg).initial_point()
    probes = probe_points(
        spec, federation, w_0, spec.diagnostics.probes, root.child(_Stage.PROBES)
    )
    report = _similarity(spec, federation, probes, root.child(_Stage.SIMILARITY))
    write_similarity_report(os.path.join(out_dir, OUTPUT_FILES.SIMILARITY), report)
    logger.info(f"Mean TV distance to the average label distribution: {np.mean(report.tv):.4f}")
    write_metadata(out_dir, "partition", spec, started)
    return report


def run_compare(spec: RunSpec, out_dir: str, workers: int = 1) -> List[SummaryRow]:
    """Trains FedAvg, Per-FedAvg (FO) and Per-FedAvg (HF) on `diagnostics.compare_seeds` seeds
    and tabulates the personalized loss and accuracy with intervals over seeds."""
    started = _timestamp()
    os.makedirs(out_dir, exist_ok=True)
    losses: Dict[str, List[float]] = {label: [] for label, _, _ in COMPARE_VARIANTS}
    accuracies: Dict[str, List[float]] = {label: [] for label, _, _ in COMPARE_VARIANTS}
    for offset in range(spec.diagnostics.compare_seeds):
        seeded = replace(spec, seed=spec.seed + offset)
        federation = build_federation(seeded)
        L_F = declared_meta_smoothness(seeded, federation)
        base = federation_config(seeded, workers, L_F, track_stationarity=False)
        for label, algorithm, kind in COMPARE_VARIANTS:
            cfg = with_kind(base, kind, algorithm)
            history = FederationServer(federation.train_models, cfg).run_training()
            result = personalize_federation(seeded, federation, history[-1].server_model)
            losses[label].append(result.mean_loss)
            if result.mean_accuracy is not None:
                accuracies[label].append(result.mean_accuracy)
            logger.info(f"Seed {seeded.seed}, {label}: personalized loss {result.mean_loss:.6g}")

    rows = [
        SummaryRow.from_values(label, losses[label], accuracies[label])
        for label, _, _ in COMPARE_VARIANTS
    ]
    summary = render_summary(rows, over=f"{spec.diagnostics.compare_seeds} seeds")
    atomic_write_text(os.path.join(out_dir, OUTPUT_FILES.SUMMARY), summary)
    comparison = {"rows": [row.to_dict() for row in rows]}
    write_json(os.path.join(out_dir, OUTPUT_FILES.COMPARISON), comparison)
    print(summary, end="")
    write_metadata(out_dir, "compare", spec, started)
    return rows


COMMANDS: Dict[str, Callable[[RunSpec, str, int], Any]] = {
    "train": run_train,
    "diagnose": run_diagnose,
    "partition": run_partition,
    "compare": run_compare,
}


def run(
    spec: RunSpec, command: str = "train", out_dir: Optional[str] = None, workers: int = 1
) -> Any:
    """Runs one subcommand on a validated spec, writing into `out_dir` or the spec's own.

    Raises:
        ConfigError: If the command is unknown.
        NumericError: If numpy reports a linear algebra or floating-point failure.
    """
    if command not in COMMANDS:
        expected = sorted(COMMANDS)
        raise ConfigError(f"unknown command {command!r}, expected one of {expected}", "command")
    with numeric_errors(f"The {command} command"):
        return COMMANDS[command](spec, out_dir or spec.output.out_dir, workers)
