"""Run configuration: YAML text with one mapping per section, parsed into validated dataclasses.

Example:

    profile: desk
    seed: 3
    federation:
      n: 10
      tau: 5
      beta: 0.002
    estimator:
      kind: hf
      alpha: 0.1
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Optional, Tuple, Union, get_args, get_origin

import yaml

from perfedavg_simulator.common.constants import ENV_VARS, PROFILES
from perfedavg_simulator.common.errors import ConfigError

logger = logging.getLogger(__name__)

FAMILIES = ("quadratic", "logistic", "mlp-mnist-subset")
DATASET_FAMILIES = ("logistic", "mlp-mnist-subset")
ESTIMATOR_KINDS = ("exact", "stochastic", "fo", "hf")
ALGORITHMS = ("perfedavg", "fedavg")
SCHEDULES = ("constant", "diminishing")

_NONNEGATIVE_TASK_FIELDS = (
    "grad_spread",
    "hess_spread",
    "grad_noise",
    "hess_noise",
    "linear_scale",
    "radius",
)
_DIAGNOSTIC_COUNTS = (
    "mc_trials",
    "probes",
    "smoothness_pairs",
    "seeds",
    "compare_seeds",
    "personalization_batch",
)


def _coerce(where: str, value: Any, annotation: Any) -> Any:
    """Checks a YAML value against a field annotation, widening ints to floats and lists to
    tuples."""
    origin = get_origin(annotation)
    if origin is Union:
        options = [option for option in get_args(annotation) if option is not type(None)]
        if value is None:
            return None
        return _coerce(where, value, options[0])
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", field=where)
        item_type = get_args(annotation)[0]
        return tuple(_coerce(where, item, item_type) for item in value)
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true or false, got {value!r}", field=where)
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=where)
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", field=where)
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", field=where)
        return value
    return value


class _Section:
    """Base of the configuration sections. Subclasses are dataclasses named by `SECTION`."""

    SECTION = ""

    def update(self, **kwargs):
        """Update attributes of the section using keyword arguments.

        Usage: section.update(attr1=val1, attr2=val2, ...)

        Raises:
            ConfigError: If a keyword is not a field of the section or has the wrong type.
        """
        annotations = {f.name: f.type for f in fields(self)}
        for attr_name, attr_val in kwargs.items():
            where = f"{self.SECTION}.{attr_name}"
            if attr_name not in annotations:
                expected = sorted(annotations)
                raise ConfigError(f"unknown key, expected one of {expected}", field=where)
            setattr(self, attr_name, _coerce(where, attr_val, annotations[attr_name]))


@dataclass
class TaskSection(_Section):
    SECTION = "task"

    family: str = "quadratic"
    dim: int = 5
    grad_spread: float = 0.5
    hess_spread: float = 0.2
    grad_noise: float = 0.1
    hess_noise: float = 0.05
    eigen_low: float = 0.5
    eigen_high: float = 2.0
    linear_scale: float = 1.0
    radius: float = 1.0
    declared_L: Optional[float] = None
    hidden: Optional[Tuple[int, ...]] = None
    feature_dim: int = 20
    per_class: int = 200
    mnist_dir: Optional[str] = None


@dataclass
class FederationSection(_Section):
    SECTION = "federation"

    n: int = 10
    r: float = 0.5
    tau: int = 5
    rounds: int = 50
    beta: Optional[float] = None
    schedule: str = "constant"
    algorithm: str = "perfedavg"
    trace_all_clients: bool = False
    workers: Optional[int] = None


@dataclass
class EstimatorSection(_Section):
    SECTION = "estimator"

    kind: str = "stochastic"
    alpha: float = 0.1
    inner_batch: int = 16
    outer_batch: int = 16
    hessian_batch: int = 16
    delta: Optional[float] = None


@dataclass
class PartitionSection(_Section):
    SECTION = "partition"

    a: int = 20
    diff_hetero: bool = False
    test_ratio: Optional[float] = None


@dataclass
class DiagnosticsSection(_Section):
    SECTION = "diagnostics"

    enabled: bool = True
    mc_trials: int = 1000
    probes: int = 20
    smoothness_pairs: int = 100
    seeds: int = 20
    compare_seeds: int = 5
    personalization_batch: int = 16


@dataclass
class OutputSection(_Section):
    SECTION = "output"

    out_dir: str = "perfedavg_out"
    write_partition: bool = True


@dataclass
class RunSpec:
    """A complete, validated run configuration."""

    task: TaskSection = field(default_factory=TaskSection)
    federation: FederationSection = field(default_factory=FederationSection)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    partition: PartitionSection = field(default_factory=PartitionSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 0
    profile: str = "desk"

    def sections(self) -> Dict[str, _Section]:
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        return {name: value for name, value in values.items() if isinstance(value, _Section)}

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        # YAML safe dumping has no tuple representation
        if payload["task"]["hidden"] is not None:
            payload["task"]["hidden"] = list(payload["task"]["hidden"])
        return payload


def _apply(spec: RunSpec, mapping: Dict[str, Any]) -> None:
    sections = spec.sections()
    for name, values in mapping.items():
        if name in ("seed", "profile"):
            continue
        if name not in sections:
            raise ConfigError(f"unknown section, expected one of {sorted(sections)}", field=name)
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError("section must be a mapping", field=name)
        sections[name].update(**values)


def default_run_spec(profile: str = "desk") -> RunSpec:
    """Defaults with a named profile applied.

    Raises:
        ConfigError: If the profile is unknown.
    """
    if profile not in PROFILES:
        raise ConfigError(
            f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}", field="profile"
        )
    spec = RunSpec(profile=profile)
    _apply(spec, PROFILES[profile])
    return spec


def _check(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise ConfigError(message, field=where)


def validate_run_spec(spec: RunSpec) -> RunSpec:
    """Cross-field validation. Raises ConfigError naming the first offending field."""
    task, fed, est = spec.task, spec.federation, spec.estimator
    part, diag = spec.partition, spec.diagnostics
    _check(
        task.family in FAMILIES, "task.family", f"must be one of {FAMILIES}, got {task.family!r}"
    )
    _check(task.dim >= 1, "task.dim", "must be at least 1")
    for name in _NONNEGATIVE_TASK_FIELDS:
        _check(getattr(task, name) >= 0, f"task.{name}", "must be nonnegative")
    _check(
        0 <= task.eigen_low <= task.eigen_high,
        "task.eigen_low",
        "need 0 <= eigen_low <= eigen_high",
    )
    if task.family == "quadratic":
        _check(
            task.hess_spread < task.eigen_low,
            "task.hess_spread",
            "must stay below eigen_low for convex tasks",
        )
    _check(
        task.feature_dim >= 1 and task.per_class >= 1,
        "task.per_class",
        "feature_dim and per_class must be positive",
    )

    _check(fed.n >= 2, "federation.n", "must be at least 2")
    _check(0.0 < fed.r <= 1.0, "federation.r", "must lie in (0, 1]")
    _check(fed.tau >= 1, "federation.tau", "must be at least 1")
    _check(fed.rounds >= 1, "federation.rounds", "must be at least 1")
    _check(fed.beta is None or fed.beta >= 0, "federation.beta", "must be nonnegative")
    _check(fed.schedule in SCHEDULES, "federation.schedule", f"must be one of {SCHEDULES}")
    _check(fed.algorithm in ALGORITHMS, "federation.algorithm", f"must be one of {ALGORITHMS}")
    _check(fed.workers is None or fed.workers >= 1, "federation.workers", "must be at least 1")

    _check(est.kind in ESTIMATOR_KINDS, "estimator.kind", f"must be one of {ESTIMATOR_KINDS}")
    _check(est.alpha >= 0, "estimator.alpha", "must be nonnegative")
    for name in ("inner_batch", "outer_batch", "hessian_batch"):
        _check(getattr(est, name) >= 1, f"estimator.{name}", "must be at least 1")
    _check(est.delta is None or est.delta > 0, "estimator.delta", "must be positive")
    if task.declared_L is not None:
        _check(
            est.alpha * task.declared_L <= 1.0,
            "estimator.alpha",
            f"alpha L <= 1 required, got alpha={est.alpha} and L={task.declared_L}",
        )

    if task.family in DATASET_FAMILIES:
        _check(fed.n % 2 == 0, "federation.n", "must be even for the two-group partition")
        _check(part.a >= 1, "partition.a", "must be positive")
        _check(
            part.diff_hetero or part.a % 2 == 0,
            "partition.a",
            "must be even unless diff_hetero is set",
        )
    _check(
        part.test_ratio is None or part.test_ratio > 0, "partition.test_ratio", "must be positive"
    )

    for name in _DIAGNOSTIC_COUNTS:
        _check(getattr(diag, name) >= 1, f"diagnostics.{name}", "must be at least 1")
    _check(spec.seed >= 0, "seed", "must be nonnegative")
    return spec


def _load_yaml(text: str) -> Dict[str, Any]:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as error:
        mark = getattr(error, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid YAML: {getattr(error, 'problem', error)}", line=line) from error
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("the configuration must be a mapping of sections", line=1)
    return data


def parse_run_spec(source: str = "", profile: Optional[str] = None) -> RunSpec:
    """Parses a run configuration from a file path or from YAML text.

    The profile named by `profile`, else by the text's `profile` key, else "desk", is applied
    first; the text's sections override it.

    Args:
        `source` (str, optional): Path to a YAML file, or YAML text. Empty gives the defaults.
        `profile` (Optional[str], optional): Profile overriding the text's own.

    Raises:
        ConfigError: On YAML syntax errors (with line number), unknown sections or keys, and
            invalid values (with field name).

    Returns:
        RunSpec: The validated configuration.
    """
    text = source
    if source and "\n" not in source and os.path.isfile(source):
        with open(source, "r", encoding="utf-8") as config_file:
            text = config_file.read()
    data = _load_yaml(text)

    chosen = profile or _coerce("profile", data.get("profile", "desk"), str)
    spec = default_run_spec(chosen)
    _apply(spec, data)
    if "seed" in data:
        spec.seed = _coerce("seed", data["seed"], int)
    logger.debug(f"Parsed run spec with profile {chosen}")
    return validate_run_spec(spec)


def serialize_run_spec(spec: RunSpec) -> str:
    """YAML text that `parse_run_spec` maps back to an equal spec."""
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=False)


def resolve_workers(spec: RunSpec, override: Optional[int] = None) -> int:
    """Worker count: the command-line override, else the config, else the PERFEDAVG_WORKERS
    environment variable, else 1.

    Raises:
        ConfigError: If the environment variable is not a positive integer.
    """
    if override is not None:
        _check(override >= 1, "--workers", "must be at least 1")
        return override
    if spec.federation.workers is not None:
        return spec.federation.workers
    raw = os.environ.get(ENV_VARS.WORKERS)
    if raw is None or raw == "":
        return 1
    try:
        workers = int(raw)
    except ValueError as error:
        raise ConfigError(f"must be an integer, got {raw!r}", field=ENV_VARS.WORKERS) from error
    _check(workers >= 1, ENV_VARS.WORKERS, "must be at least 1")
    return workers
