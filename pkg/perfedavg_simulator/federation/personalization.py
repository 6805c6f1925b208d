"""Test-time personalization: one stochastic gradient step on a user's test data, then
evaluation of the adapted model."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.kernel.rng import Purpose, RngStream
from perfedavg_simulator.objective.batch_oracles import batch_grad
from perfedavg_simulator.objective.loss_model import LossModel
from perfedavg_simulator.objective.mlp import evaluate_accuracy
from perfedavg_simulator.objective.samples import Batch

logger = logging.getLogger(__name__)


def personalize(
    model: LossModel,
    w_final: ParamVector,
    alpha: float,
    test_batch: Union[Batch, int],
    rng: Optional[RngStream] = None,
) -> ParamVector:
    """User-specific model w_final - alpha g~(w_final, test batch).

    Args:
        `model` (LossModel): The user's test task.
        `w_final` (ParamVector): Trained server model.
        `alpha` (float): Personalization stepsize.
        `test_batch` (Union[Batch, int]): The batch, or a batch size to draw from `rng`.
        `rng` (Optional[RngStream], optional): Stream of the draw when a size is given.

    Raises:
        InvalidArgumentError: If the batch is empty or a size is given without a stream.

    Returns:
        ParamVector: The personalized model.
    """
    if not alpha >= 0:
        raise InvalidArgumentError(f"alpha must be nonnegative, got {alpha}")
    if not isinstance(test_batch, Batch):
        if rng is None:
            raise InvalidArgumentError("Drawing a personalization batch needs a stream")
        test_batch = model.draw_batch(int(test_batch), rng.child(Purpose.PERSONALIZE).generator())
    return w_final - alpha * batch_grad(model, w_final, test_batch)


@dataclass
class PersonalizationResult:
    """Per-user loss (and accuracy for classifiers) of the personalized models."""

    losses: List[float]
    accuracies: Optional[List[float]] = None
    models: List[ParamVector] = field(default_factory=list, repr=False)

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.losses))

    @property
    def mean_accuracy(self) -> Optional[float]:
        if self.accuracies is None:
            return None
        return float(np.mean(self.accuracies))


def evaluate_personalization(
    test_models: Sequence[LossModel],
    w: ParamVector,
    alpha: float,
    batch_size: int,
    rng: RngStream,
) -> PersonalizationResult:
    """Personalizes `w` for every user on a batch of the user's test data and evaluates the
    result with the user's exact test loss.

    Args:
        `test_models` (Sequence[LossModel]): Each user's test task, with exact oracles.
        `w` (ParamVector): Trained server model.
        `alpha` (float): Personalization stepsize.
        `batch_size` (int): Size of the personalization batch.
        `rng` (RngStream): Stream of the batches; user i draws from its child stream i.

    Returns:
        PersonalizationResult: Losses and, for classifiers, accuracies per user.
    """
    losses, accuracies, personalized = [], [], []
    for user, model in enumerate(test_models):
        w_user = personalize(model, w, alpha, batch_size, rng.child(user))
        personalized.append(w_user)
        losses.append(model.exact_loss(w_user))
        if model.num_classes is not None:
            accuracies.append(evaluate_accuracy(model, w_user))
    logger.debug(f"Personalized {len(test_models)} users, mean loss {np.mean(losses):.6g}")
    return PersonalizationResult(
        losses=losses, accuracies=accuracies if accuracies else None, models=personalized
    )
