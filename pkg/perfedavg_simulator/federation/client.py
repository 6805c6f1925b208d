"""Local computation of one client in one round."""

import logging

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.federation.config import Algorithm, FederationConfig
from perfedavg_simulator.federation.round_data import ClientTrace
from perfedavg_simulator.kernel.rng import Purpose, RngStream, client_stream
from perfedavg_simulator.metagrad.estimators import local_update_step
from perfedavg_simulator.objective.batch_oracles import batch_grad
from perfedavg_simulator.objective.loss_model import LossModel

logger = logging.getLogger(__name__)


def fedavg_local_step(
    model: LossModel, w: ParamVector, beta: float, batch_size: int, rng: RngStream
) -> ParamVector:
    """One local SGD step w - beta g~(w, D). The batch comes from the `Purpose.OUTER_GRAD` child
    stream, so the step equals the first-order Per-FedAvg step at alpha = 0.

    Args:
        `model` (LossModel): The client's task.
        `w` (ParamVector): Current local iterate.
        `beta` (float): Stepsize, nonnegative.
        `batch_size` (int): Size D of the batch.
        `rng` (RngStream): Stream of this local step.

    Returns:
        ParamVector: The next local iterate.
    """
    if not beta >= 0:
        raise InvalidArgumentError(f"beta must be nonnegative, got {beta}")
    batch = model.draw_batch(batch_size, rng.child(Purpose.OUTER_GRAD).generator())
    return w - beta * batch_grad(model, w, batch)


def run_client(
    model: LossModel,
    w_k: ParamVector,
    cfg: FederationConfig,
    k: int,
    client_id: int,
    beta: float,
) -> ClientTrace:
    """Runs tau local steps of the configured algorithm from the server model w_k.

    Args:
        `model` (LossModel): The client's task.
        `w_k` (ParamVector): Incoming server model.
        `cfg` (FederationConfig): Run parameters.
        `k` (int): Round index.
        `client_id` (int): Client index i; with k and the local step it keys the client's streams.
        `beta` (float): Outer stepsize of this round.

    Returns:
        ClientTrace: The tau + 1 local iterates.
    """
    logger.debug(f"Client {client_id} running {cfg.tau} local steps in round {k}")
    root = cfg.root_stream
    iterates = [w_k]
    w = w_k
    for t in range(cfg.tau):
        stream = client_stream(root, k, client_id, t)
        if cfg.algorithm is Algorithm.PER_FEDAVG:
            w = local_update_step(model, w, cfg.estimator, beta, stream)
        else:
            w = fedavg_local_step(model, w, beta, cfg.estimator.outer_batch, stream)
        iterates.append(w)
    return ClientTrace(client_id=client_id, iterates=iterates)
