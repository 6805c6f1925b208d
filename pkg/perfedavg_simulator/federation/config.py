"""Run parameters of a federation: user counts, local steps, rounds and the outer stepsize
schedule."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from perfedavg_simulator.common.errors import HypothesisViolationError, InvalidArgumentError
from perfedavg_simulator.kernel.rng import RngStream
from perfedavg_simulator.kernel.sampling import participant_count
from perfedavg_simulator.metagrad.estimator_config import MetaEstimator


class Algorithm(Enum):
    PER_FEDAVG = "perfedavg"
    FEDAVG = "fedavg"


class ScheduleKind(Enum):
    CONSTANT = "constant"
    DIMINISHING = "diminishing"


def admissible_beta(tau: int, L_F: float) -> float:
    """Largest outer stepsize under which the stationarity bound holds, 1 / (10 tau L_F)."""
    if tau < 1 or not L_F > 0:
        raise InvalidArgumentError(f"Need tau >= 1 and L_F > 0, got tau={tau}, L_F={L_F}")
    return 1.0 / (10.0 * tau * L_F)


@dataclass(frozen=True)
class BetaSchedule:
    """Outer stepsize per round. The diminishing schedule is beta_k = c / sqrt(tau (k + 1)) with
    c chosen so that beta_0 equals `beta0`.

    Attributes:
        `beta0` (float): Stepsize of round 0. Nonnegative.
        `kind` (ScheduleKind): Constant or diminishing.
    """

    beta0: float
    kind: ScheduleKind = ScheduleKind.CONSTANT

    def __post_init__(self):
        if not isinstance(self.kind, ScheduleKind):
            object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not self.beta0 >= 0:
            raise InvalidArgumentError(f"beta must be nonnegative, got {self.beta0}")

    def at(self, k: int, tau: int) -> float:
        if self.kind is ScheduleKind.CONSTANT:
            return self.beta0
        c = self.beta0 * math.sqrt(tau)
        return c / math.sqrt(tau * (k + 1))


@dataclass(frozen=True)
class FederationConfig:
    """Parameters of one training run.

    Attributes:
        `n` (int): Number of users.
        `r` (float): Fraction of users active per round, in (0, 1].
        `tau` (int): Local steps per round.
        `K` (int): Number of rounds.
        `beta` (BetaSchedule): Outer stepsize schedule.
        `estimator` (MetaEstimator): Meta-gradient estimator of Per-FedAvg clients. Its `alpha`
            also defines the meta-objective used for stationarity telemetry, and FedAvg clients
            use its `outer_batch` as their SGD batch size.
        `algorithm` (Algorithm): Per-FedAvg or FedAvg.
        `seed` (int): Root seed of the run.
        `workers` (int): Size of the client worker pool. Does not affect results.
        `trace_all_clients` (bool): Also run the local updates of inactive users so that drift is
            measured over all n users. Active users' trajectories are unaffected.
        `track_stationarity` (bool): Record |grad F|^2 at every averaged mid-iterate.
        `retain_models` (bool): Keep per-round server models and mid-iterate averages in the
            history. When False only the final round keeps them.
        `L_F` (Optional[float]): Smoothness of the meta-functions, if known. Enables the stepsize
            hypothesis check.
    """

    n: int
    r: float
    tau: int
    K: int
    beta: BetaSchedule
    estimator: MetaEstimator
    algorithm: Algorithm = Algorithm.PER_FEDAVG
    seed: int = 0
    workers: int = 1
    trace_all_clients: bool = False
    track_stationarity: bool = True
    retain_models: bool = True
    L_F: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.algorithm, Algorithm):
            object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.n < 1:
            raise InvalidArgumentError(f"n must be positive, got {self.n}")
        if not 0.0 < self.r <= 1.0:
            raise InvalidArgumentError(f"r must lie in (0, 1], got {self.r}")
        if self.tau < 1:
            raise InvalidArgumentError(f"tau must be at least 1, got {self.tau}")
        if self.K < 1:
            raise InvalidArgumentError(f"K must be at least 1, got {self.K}")
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be at least 1, got {self.workers}")
        if self.L_F is not None and self.beta.beta0 > admissible_beta(self.tau, self.L_F):
            raise HypothesisViolationError(
                f"beta={self.beta.beta0} exceeds 1/(10 tau L_F) = "
                f"{admissible_beta(self.tau, self.L_F)} for tau={self.tau}, L_F={self.L_F}"
            )

    @property
    def active_count(self) -> int:
        return participant_count(self.n, self.r)

    @property
    def root_stream(self) -> RngStream:
        return RngStream.from_seed(self.seed)
