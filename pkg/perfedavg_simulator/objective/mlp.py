"""Fully connected ELU network with softmax cross-entropy loss, exact backpropagation and exact
Hessian-vector products."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.special import log_softmax, softmax

from perfedavg_simulator.common.constants import ELU_ALPHA
from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.common.utils import check_same_dim, ensure_finite
from perfedavg_simulator.objective.loss_model import DeclaredConstants, LossModel
from perfedavg_simulator.objective.samples import Batch

logger = logging.getLogger(__name__)

Layer = Tuple[NDArray[np.float64], NDArray[np.float64]]


def elu(z: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.where(z > 0, z, ELU_ALPHA * np.expm1(np.minimum(z, 0.0)))


def elu_prime(z: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.where(z > 0, 1.0, ELU_ALPHA * np.exp(np.minimum(z, 0.0)))


def elu_second(z: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.where(z > 0, 0.0, ELU_ALPHA * np.exp(np.minimum(z, 0.0)))


@dataclass
class ForwardCache:
    """Pre-activations and activations of one forward pass. `activations[0]` is the input."""

    pre_activations: List[NDArray[np.float64]]
    activations: List[NDArray[np.float64]]
    probabilities: NDArray[np.float64]
    log_probabilities: NDArray[np.float64]


class MlpEluModel(LossModel):
    """Multilayer perceptron with ELU hidden activations and a softmax output trained with mean
    cross-entropy. Parameters are flattened layer by layer as the row-major weight matrix
    (out x in) followed by the bias.

    When built with a dataset, the dataset defines the user's empirical distribution: batches are
    drawn uniformly with replacement from it and the exact oracles are full-dataset evaluations.

    Extends: LossModel
    """

    def __init__(self, widths: Sequence[int], dataset: Optional[Batch] = None):
        """Initializes an instance of `MlpEluModel`.

        Args:
            `widths` (Sequence[int]): Layer widths [in, hidden..., out]. At least two entries; an
                empty hidden list gives multinomial logistic regression.
            `dataset` (Optional[Batch], optional): The user's data. Defaults to None.

        Raises:
            InvalidArgumentError: If a width is not positive, fewer than two classes are declared,
                or the dataset does not match the input width or label range.
        """
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2 or any(w < 1 for w in widths) or widths[-1] < 2:
            raise InvalidArgumentError(f"Invalid layer widths {widths}")
        self.__widths = widths
        self.__shapes = [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]
        dim = sum(out * inp + out for out, inp in self.__shapes)
        if dataset is not None:
            self._check_batch(dataset)
        super().__init__(dim=dim, constants=DeclaredConstants(), evaluation_set=dataset)

    def _check_batch(self, batch: Batch) -> None:
        if batch.features.shape[1] != self.__widths[0]:
            raise InvalidArgumentError(
                f"Input width is {self.__widths[0]}, got {batch.features.shape[1]} features"
            )
        labels = batch.labels
        if np.any(labels < 0) or np.any(labels >= self.__widths[-1]):
            raise InvalidArgumentError(f"Labels must lie in [0, {self.__widths[-1]})")

    def unflatten(self, w: ParamVector) -> List[Layer]:
        """Splits a flat parameter vector into (W, b) views, one pair per layer."""
        check_same_dim(self.dim, w, "parameters")
        layers = []
        offset = 0
        for out, inp in self.__shapes:
            W = w[offset : offset + out * inp].reshape(out, inp)
            offset += out * inp
            b = w[offset : offset + out]
            offset += out
            layers.append((W, b))
        return layers

    def flatten(self, layers: Sequence[Layer]) -> ParamVector:
        return np.concatenate([np.concatenate([W.reshape(-1), b]) for W, b in layers])

    def forward(self, w: ParamVector, features: NDArray[np.float64]) -> ForwardCache:
        layers = self.unflatten(w)
        activation = features
        pre_activations, activations = [], [features]
        for index, (W, b) in enumerate(layers):
            z = activation @ W.T + b
            pre_activations.append(z)
            if index < len(layers) - 1:
                activation = elu(z)
                activations.append(activation)
        logits = pre_activations[-1]
        return ForwardCache(
            pre_activations=pre_activations,
            activations=activations,
            probabilities=softmax(logits, axis=1),
            log_probabilities=log_softmax(logits, axis=1),
        )

    def _one_hot(self, labels: NDArray[np.int64]) -> NDArray[np.float64]:
        return np.eye(self.__widths[-1])[labels]

    def _batch_loss(self, batch: Batch, w: ParamVector) -> float:
        self._check_batch(batch)
        cache = self.forward(w, batch.features)
        picked = cache.log_probabilities[np.arange(batch.size), batch.labels]
        loss = -float(np.mean(picked))
        ensure_finite(loss, "loss")
        return loss

    def _backward(
        self, w: ParamVector, batch: Batch, cache: ForwardCache
    ) -> Tuple[List[Layer], List[NDArray[np.float64]]]:
        layers = self.unflatten(w)
        delta = (cache.probabilities - self._one_hot(batch.labels)) / batch.size
        grads: List[Layer] = [None] * len(layers)  # type: ignore
        deltas: List[NDArray[np.float64]] = [None] * len(layers)  # type: ignore
        for index in range(len(layers) - 1, -1, -1):
            deltas[index] = delta
            grads[index] = (delta.T @ cache.activations[index], delta.sum(axis=0))
            if index > 0:
                W, _ = layers[index]
                delta = (delta @ W) * elu_prime(cache.pre_activations[index - 1])
        return grads, deltas

    def _batch_grad(self, batch: Batch, w: ParamVector) -> ParamVector:
        self._check_batch(batch)
        cache = self.forward(w, batch.features)
        grads, _ = self._backward(w, batch, cache)
        gradient = self.flatten(grads)
        ensure_finite(gradient, "gradient")
        return gradient

    def _batch_hvp(self, batch: Batch, w: ParamVector, v: ParamVector) -> ParamVector:
        """Exact Hessian-vector product by forward-mode differentiation of backpropagation along
        v (the R-operator)."""
        self._check_batch(batch)
        layers = self.unflatten(w)
        directions = self.unflatten(v)
        cache = self.forward(w, batch.features)
        _, deltas = self._backward(w, batch, cache)
        depth = len(layers)

        # Forward pass of the directional derivatives R(z_l), R(a_l)
        r_activation = np.zeros_like(batch.features)
        r_pre, r_activations = [], [r_activation]
        for index, ((W, _), (VW, Vb)) in enumerate(zip(layers, directions)):
            r_z = r_activation @ W.T + cache.activations[index] @ VW.T + Vb
            r_pre.append(r_z)
            if index < depth - 1:
                r_activation = elu_prime(cache.pre_activations[index]) * r_z
                r_activations.append(r_activation)

        probabilities = cache.probabilities
        r_logits = r_pre[-1]
        r_probabilities = probabilities * (
            r_logits - np.sum(probabilities * r_logits, axis=1, keepdims=True)
        )
        r_delta = r_probabilities / batch.size

        hvp: List[Layer] = [None] * depth  # type: ignore
        for index in range(depth - 1, -1, -1):
            delta = deltas[index]
            hvp[index] = (
                r_delta.T @ cache.activations[index] + delta.T @ r_activations[index],
                r_delta.sum(axis=0),
            )
            if index > 0:
                W, _ = layers[index]
                VW, _ = directions[index]
                z = cache.pre_activations[index - 1]
                r_delta = (r_delta @ W + delta @ VW) * elu_prime(z) + (delta @ W) * elu_second(
                    z
                ) * r_pre[index - 1]
        product = self.flatten(hvp)
        ensure_finite(product, "Hessian-vector product")
        return product

    def _draw_batch(self, size: int, rng: np.random.Generator) -> Batch:
        if self.evaluation_set is None:
            raise InvalidArgumentError("Cannot draw batches from a model without a dataset")
        return self.evaluation_set.subset(rng.integers(0, self.evaluation_set.size, size=size))

    def initial_point(self, rng: np.random.Generator) -> ParamVector:
        """Glorot-uniform weights, zero biases."""
        layers = []
        for out, inp in self.__shapes:
            limit = np.sqrt(6.0 / (inp + out))
            layers.append((rng.uniform(-limit, limit, size=(out, inp)), np.zeros(out)))
        return self.flatten(layers)

    def predict(self, w: ParamVector, features: NDArray[np.float64]) -> NDArray[np.int64]:
        return np.argmax(self.forward(w, features).pre_activations[-1], axis=1)

    @property
    def widths(self) -> Tuple[int, ...]:
        return self.__widths

    @property
    def num_classes(self) -> Optional[int]:
        return self.__widths[-1]


def mlp_loss_and_grad(
    model: MlpEluModel, w: ParamVector, batch: Batch
) -> Tuple[float, ParamVector]:
    """Mean cross-entropy of the batch and its exact gradient with respect to w.

    Args:
        `model` (MlpEluModel): The network.
        `w` (ParamVector): Flat parameters.
        `batch` (Batch): Labeled samples.

    Raises:
        InvalidArgumentError: If a label is out of range or the feature width does not match.

    Returns:
        Tuple[float, ParamVector]: The loss and the gradient.
    """
    return model.batch_loss(batch, w), model.batch_grad(batch, w)


def evaluate_accuracy(model: LossModel, w: ParamVector, batch: Optional[Batch] = None) -> float:
    """Fraction of correctly classified samples of `batch`, or of the model's own dataset.

    Raises:
        InvalidArgumentError: If the model is not a classifier or there is nothing to evaluate.
    """
    if not isinstance(model, MlpEluModel):
        raise InvalidArgumentError(f"{model.__class__.__name__} is not a classifier")
    batch = batch if batch is not None else model.evaluation_set
    if batch is None:
        raise InvalidArgumentError("No samples to evaluate accuracy on")
    return float(np.mean(model.predict(w, batch.features) == batch.labels))
