"""The round engine: client selection, local updates of the active clients, averaging, and the
telemetry the diagnostics consume."""

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from perfedavg_simulator.common.constants import ROUND_LOG_INTERVAL
from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.common.utils import check_same_dim, ensure_finite
from perfedavg_simulator.federation.client import run_client
from perfedavg_simulator.federation.config import FederationConfig
from perfedavg_simulator.federation.round_data import ClientTrace, DriftStats, RoundRecord
from perfedavg_simulator.kernel.rng import Purpose, RngStream, Scope, server_stream
from perfedavg_simulator.kernel.sampling import IndexSubset, sample_without_replacement
from perfedavg_simulator.metagrad.meta_function import meta_gradient
from perfedavg_simulator.objective.loss_model import LossModel

logger = logging.getLogger(__name__)

RoundCallback = Callable[[RoundRecord], None]


def get_executor(workers: int) -> Optional[Executor]:
    """A thread pool for more than one worker, None for sequential evaluation."""
    if workers > 1:
        return ThreadPoolExecutor(max_workers=workers)
    else:
        return None


def pick_report_index(tau: int, rng: RngStream) -> int:
    """Draws the reported local step t_k uniformly on {0, ..., tau - 1}.

    Raises:
        InvalidArgumentError: If tau is not positive.
    """
    if tau < 1:
        raise InvalidArgumentError(f"tau must be at least 1, got {tau}")
    return int(rng.generator().integers(0, tau))


def _drift(stack: NDArray[np.float64], population: str) -> DriftStats:
    """Drift moments of stacked iterates of shape (clients, tau + 1, d) around their mean."""
    deviations = stack - stack.mean(axis=0, keepdims=True)
    norms_sq = np.sum(deviations**2, axis=2)
    return DriftStats(
        mean_norm=[float(v) for v in np.mean(np.sqrt(norms_sq), axis=0)],
        mean_sq_norm=[float(v) for v in np.mean(norms_sq, axis=0)],
        population=population,
    )


class FederationServer:
    """Holds the clients' tasks and runs rounds of Per-FedAvg or FedAvg.

    Clients are evaluated by a worker pool when `cfg.workers` > 1. Each client's work is a pure
    function of (w_k, task, cfg, stream path), and results are reduced in client-id order, so the
    history does not depend on the worker count.

    Attributes:
        `models` (Sequence[LossModel]): Task of every user.
        `cfg` (FederationConfig): Run parameters.
    """

    def __init__(self, models: Sequence[LossModel], cfg: FederationConfig):
        """Initializes an instance of `FederationServer`.

        Args:
            `models` (Sequence[LossModel]): Task of every user, all of the same dimension.
            `cfg` (FederationConfig): Run parameters. `cfg.n` must equal the number of tasks.

        Raises:
            InvalidArgumentError: If the task count or dimensions disagree.
        """
        logger.debug("Initializing federation server...")
        if len(models) != cfg.n:
            raise InvalidArgumentError(
                f"Config declares n={cfg.n} users but got {len(models)} tasks"
            )
        dims = {model.dim for model in models}
        if len(dims) != 1:
            raise InvalidArgumentError(
                f"All client tasks must share one dimension, got {sorted(dims)}"
            )
        self.__models = list(models)
        self.__cfg = cfg
        self.__dim = dims.pop()

    def select_clients(self, k: int) -> IndexSubset:
        stream = server_stream(self.__cfg.root_stream, k, Purpose.SELECTION)
        return sample_without_replacement(self.__cfg.n, self.__cfg.active_count, stream)

    def __run_clients(
        self,
        w_k: ParamVector,
        k: int,
        beta: float,
        clients: Sequence[int],
        executor: Optional[Executor],
    ) -> List[ClientTrace]:
        def work(client_id: int) -> ClientTrace:
            return run_client(self.__models[client_id], w_k, self.__cfg, k, client_id, beta)

        if executor is None:
            return [work(client_id) for client_id in clients]
        return list(executor.map(work, clients))

    def run_round(
        self, w_k: ParamVector, k: int, executor: Optional[Executor] = None
    ) -> RoundRecord:
        """Runs round k from the server model w_k.

        Args:
            `w_k` (ParamVector): Incoming server model.
            `k` (int): Round index.
            `executor` (Optional[Executor], optional): Worker pool. Defaults to sequential.

        Raises:
            InvalidArgumentError: If w_k has the wrong dimension.
            NumericError: If the new server model is not finite.

        Returns:
            RoundRecord: The round's telemetry.
        """
        cfg = self.__cfg
        check_same_dim(self.__dim, w_k, "server model")
        active = self.select_clients(k)
        if active.size == 0:
            raise InvalidArgumentError("Active set is empty")
        report_index = pick_report_index(cfg.tau, server_stream(cfg.root_stream, k, Purpose.REPORT))
        beta = cfg.beta.at(k, cfg.tau)

        traced = list(range(cfg.n)) if cfg.trace_all_clients else list(active.indices)
        traces = self.__run_clients(w_k, k, beta, traced, executor)
        stack = np.stack([np.stack(trace.iterates) for trace in traces])
        position = {client_id: index for index, client_id in enumerate(traced)}
        active_stack = stack[[position[i] for i in active.indices]]

        mid_averages = list(active_stack.mean(axis=0))
        server_model = mid_averages[-1]
        ensure_finite(server_model, "server model")

        stationarity: List[float] = []
        if cfg.track_stationarity:
            stationarity = [
                float(np.sum(meta_gradient(self.__models, w_bar, cfg.estimator.alpha) ** 2))
                for w_bar in mid_averages
            ]
        drift = _drift(stack, "all" if cfg.trace_all_clients else "active")
        return RoundRecord(
            k=k,
            active=active,
            beta=beta,
            report_index=report_index,
            server_model=server_model,
            mid_averages=mid_averages,
            stationarity=stationarity,
            drift=drift,
        )

    def run_training(
        self, w_0: Optional[ParamVector] = None, on_round: Optional[RoundCallback] = None
    ) -> List[RoundRecord]:
        """Runs K rounds.

        Args:
            `w_0` (Optional[ParamVector], optional): Initial server model. Defaults to the first
                task's `initial_point` drawn from the run's setup stream.
            `on_round` (Optional[RoundCallback], optional): Called with every record as soon as
                its round completes.

        Returns:
            List[RoundRecord]: One record per round.
        """
        cfg = self.__cfg
        if w_0 is None:
            w_0 = self.initial_point()
        logger.info(
            f"Training {cfg.algorithm.value} for {cfg.K} rounds: n={cfg.n}, "
            f"active={cfg.active_count}, tau={cfg.tau}, estimator={cfg.estimator.kind.value}"
        )
        history: List[RoundRecord] = []
        executor = get_executor(cfg.workers)
        try:
            w = np.asarray(w_0, dtype=np.float64)
            for k in range(cfg.K):
                record = self.run_round(w, k, executor)
                w = record.server_model
                if on_round is not None:
                    on_round(record)
                if not cfg.retain_models and history:
                    history[-1].drop_models()
                history.append(record)
                if (k + 1) % ROUND_LOG_INTERVAL == 0 or k + 1 == cfg.K:
                    logger.info(
                        f"Round {k + 1}/{cfg.K}: |w| = {np.linalg.norm(w):.6g}, "
                        f"reported |grad F|^2 = {record.report_stationarity}"
                    )
        finally:
            if executor is not None:
                executor.shutdown()
        return history

    def initial_point(self) -> ParamVector:
        stream = self.__cfg.root_stream.child(Scope.SETUP, Purpose.INIT)
        return self.__models[0].initial_point(stream.generator())

    @property
    def models(self) -> List[LossModel]:
        return self.__models

    @property
    def cfg(self) -> FederationConfig:
        return self.__cfg


def run_round(
    state: ParamVector,
    models: Sequence[LossModel],
    cfg: FederationConfig,
    k: int,
    executor: Optional[Executor] = None,
) -> RoundRecord:
    """Runs round k of the configured algorithm from the server model `state`."""
    return FederationServer(models, cfg).run_round(state, k, executor)


def run_training(
    models: Sequence[LossModel],
    cfg: FederationConfig,
    w_0: Optional[ParamVector] = None,
    on_round: Optional[RoundCallback] = None,
) -> List[RoundRecord]:
    """Runs K rounds of the configured algorithm. Deterministic given `cfg.seed`, whatever the
    worker count."""
    return FederationServer(models, cfg).run_training(w_0, on_round)
