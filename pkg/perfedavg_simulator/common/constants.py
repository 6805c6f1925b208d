"""Constants used across the perfedavg simulator package."""

from dataclasses import dataclass
from typing import Any, Dict


# Class declarations for constants. These are not meant to be accessed directly.
@dataclass(frozen=True)
class ExitCodes:
    SUCCESS: int = 0
    CONFIG: int = 2
    DATA: int = 3
    NUMERIC: int = 4


@dataclass(frozen=True)
class OutputFileNames:
    ROUND_LOG: str = "rounds.jsonl"
    MODEL_BLOB: str = "model.bin"
    DIAGNOSTICS: str = "diagnostics.json"
    SUMMARY: str = "summary.txt"
    METADATA: str = "metadata.json"
    TIMINGS: str = "timings.jsonl"
    PARTITION: str = "partition.csv"
    SIMILARITY: str = "similarity.json"
    COMPARISON: str = "comparison.json"


@dataclass(frozen=True)
class MnistFileNames:
    TRAIN_IMAGES: str = "train-images-idx3-ubyte"
    TRAIN_LABELS: str = "train-labels-idx1-ubyte"
    TEST_IMAGES: str = "t10k-images-idx3-ubyte"
    TEST_LABELS: str = "t10k-labels-idx1-ubyte"


@dataclass(frozen=True)
class EnvironmentVariables:
    WORKERS: str = "PERFEDAVG_WORKERS"
    MNIST_DIR: str = "PERFEDAVG_MNIST_DIR"


# Directly accessible constants

# Process exit status per failure category
EXIT_CODES = ExitCodes()

# File names written into a run's output directory
OUTPUT_FILES = OutputFileNames()

# IDX file names of the MNIST distribution, optionally followed by ".gz"
MNIST_FILES = MnistFileNames()

# Environment variables read by the command line interface
ENV_VARS = EnvironmentVariables()

# Format of every log line emitted once the command line interface configures logging
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

# Central finite-difference step on unit-scale problems
DEFAULT_FD_STEP = 1e-5

# Hessian-free probe scale; the effective step is this value divided by max(1, |probe|)
HF_DELTA_SCALE = 1e-3

# Below this many Monte-Carlo trials a bound report carries a warning flag
MC_MIN_TRIALS = 1000

# One-sided tolerance of every bound check: measured <= analytic * (1 + rel) + abs
BOUND_RELATIVE_TOL = 1e-9
BOUND_ABSOLUTE_TOL = 1e-12

# Confidence level of the one-sided Monte-Carlo upper bound in bound reports
MC_CONFIDENCE = 0.99

# Confidence level of the intervals in the comparison summary table
SUMMARY_CONFIDENCE = 0.95

# Random unit probes used to lower-bound operator norms of Hessian deviations
HVP_PROBES = 20

# Largest support handled by the exact transport linear program
W1_MAX_SUPPORT = 64

# Seeds averaged over by seed-level diagnostics
DEFAULT_SEEDS = 20

# Outer stepsize used when none is configured and the meta-smoothness L_F is unknown
DEFAULT_BETA = 0.002

# Condition number above which the closed-form meta-stationary system is declined
MAX_CONDITION_NUMBER = 1e12

# ELU activation parameter
ELU_ALPHA = 1.0

# Hidden layer widths of the default multilayer perceptron
MLP_HIDDEN_WIDTHS = (80, 60)

# Number of classes of the image tasks and size of each partition group's class block
NUM_CLASSES = 10
CLASSES_PER_GROUP = 5

# Log one info line every this many rounds
ROUND_LOG_INTERVAL = 10

# Named configuration profiles. Each entry overrides section fields of the default run spec.
PROFILES: Dict[str, Dict[str, Dict[str, Any]]] = {
    "desk": {
        "task": {"family": "quadratic", "dim": 5},
        "federation": {"n": 10, "r": 0.5, "tau": 5, "rounds": 50},
        "estimator": {"alpha": 0.1, "inner_batch": 16, "outer_batch": 16, "hessian_batch": 16},
    },
    "full": {
        "task": {"family": "mlp-mnist-subset"},
        "federation": {"n": 50, "r": 0.2, "tau": 10, "rounds": 1000, "beta": 0.001},
        "estimator": {"alpha": 0.01, "inner_batch": 40, "outer_batch": 40, "hessian_batch": 40},
        "partition": {"a": 196},
    },
}
