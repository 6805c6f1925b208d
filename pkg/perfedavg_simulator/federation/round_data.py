"""Records produced by the round engine."""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.kernel.sampling import IndexSubset


@dataclass
class ClientTrace:
    """Local iterates w_{k+1,t}^i, t = 0..tau, of one client in one round. `iterates[0]` is the
    round's incoming server model."""

    client_id: int
    iterates: List[ParamVector]


@dataclass
class DriftStats:
    """Per local step t = 0..tau, mean of |w^i - w_bar| and of |w^i - w_bar|^2 over the traced
    population. `population` is "active" or "all"."""

    mean_norm: List[float]
    mean_sq_norm: List[float]
    population: str


@dataclass
class RoundRecord:
    """Telemetry of one round.

    Attributes:
        `k` (int): Round index.
        `active` (IndexSubset): Users selected in this round.
        `beta` (float): Outer stepsize used.
        `report_index` (int): Local step t_k drawn uniformly on {0, ..., tau - 1}.
        `server_model` (Optional[ParamVector]): w_{k+1}. None once dropped from the history.
        `mid_averages` (Optional[List[ParamVector]]): Averages of active iterates, t = 0..tau.
        `stationarity` (List[float]): |grad F(w_bar_{k+1,t})|^2 for t = 0..tau, empty if not
            tracked.
        `drift` (DriftStats): Drift moments per local step.
    """

    k: int
    active: IndexSubset
    beta: float
    report_index: int
    server_model: Optional[ParamVector]
    mid_averages: Optional[List[ParamVector]]
    stationarity: List[float]
    drift: DriftStats

    @property
    def report_stationarity(self) -> Optional[float]:
        if not self.stationarity:
            return None
        return self.stationarity[self.report_index]

    def drop_models(self) -> None:
        self.server_model = None
        self.mid_averages = None

    def to_log_entry(self) -> Dict[str, Any]:
        """JSON-serializable summary of the round. Holds no wall-clock data, so equal runs give
        equal entries."""
        entry: Dict[str, Any] = {
            "k": self.k,
            "t_k": self.report_index,
            "active": list(self.active.indices),
            "beta": self.beta,
            "stationarity": list(self.stationarity),
            "report_stationarity": self.report_stationarity,
            "drift_mean": list(self.drift.mean_norm),
            "drift_mean_sq": list(self.drift.mean_sq_norm),
            "drift_population": self.drift.population,
        }
        if self.server_model is not None:
            entry["server_model_norm"] = float(np.linalg.norm(self.server_model))
        return entry
