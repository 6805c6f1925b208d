"""Labeled datasets for classification tasks: the MNIST files and synthetic gaussian classes."""

import logging
import os
from typing import List, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from perfedavg_simulator.common.constants import MNIST_FILES, NUM_CLASSES
from perfedavg_simulator.common.errors import DataError, InvalidArgumentError
from perfedavg_simulator.kernel.rng import RngStream
from perfedavg_simulator.objective.idx import read_images, read_labels
from perfedavg_simulator.objective.mlp import MlpEluModel
from perfedavg_simulator.objective.samples import Batch

logger = logging.getLogger(__name__)


def _locate(directory: str, name: str) -> str:
    for candidate in (name, name + ".gz"):
        path = os.path.join(directory, candidate)
        if os.path.isfile(path):
            return path
    raise DataError(f"Neither {name} nor {name}.gz found in {directory}")


def load_mnist(directory: str) -> Tuple[Batch, Batch]:
    """Loads the MNIST train and test splits with flattened images scaled to [0, 1].

    Args:
        `directory` (str): Directory holding the four IDX files, optionally gzip-compressed.

    Raises:
        DataError: If a file is missing or malformed, or images and labels disagree in count.

    Returns:
        Tuple[Batch, Batch]: The train and test splits.
    """
    if not os.path.isdir(directory):
        raise DataError(f"MNIST directory not found: {directory}")
    splits = []
    for images_name, labels_name in (
        (MNIST_FILES.TRAIN_IMAGES, MNIST_FILES.TRAIN_LABELS),
        (MNIST_FILES.TEST_IMAGES, MNIST_FILES.TEST_LABELS),
    ):
        images = read_images(_locate(directory, images_name))
        labels = read_labels(_locate(directory, labels_name))
        if images.shape[0] != labels.shape[0]:
            raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels in {directory}")
        splits.append(Batch(images, labels))
    logger.info(f"Loaded MNIST with {splits[0].size} train and {splits[1].size} test images")
    return splits[0], splits[1]


def make_gaussian_classes(
    per_class: int,
    dim: int,
    rng: RngStream,
    num_classes: int = NUM_CLASSES,
    separation: float = 2.0,
    noise_std: float = 1.0,
) -> Batch:
    """Draws a labeled dataset with one isotropic gaussian blob per class.

    Args:
        `per_class` (int): Samples per class.
        `dim` (int): Feature dimension.
        `rng` (RngStream): Stream of the draws.
        `num_classes` (int, optional): Number of classes. Defaults to `NUM_CLASSES`.
        `separation` (float, optional): Norm of every class mean. Defaults to 2.
        `noise_std` (float, optional): Per-coordinate standard deviation. Defaults to 1.

    Returns:
        Batch: Samples grouped by class, labels 0 to num_classes - 1.
    """
    if per_class < 1 or dim < 1 or num_classes < 2:
        raise InvalidArgumentError("Gaussian classes need per_class >= 1, dim >= 1, >= 2 classes")
    generator = rng.generator()
    means = generator.normal(size=(num_classes, dim))
    means *= separation / np.linalg.norm(means, axis=1, keepdims=True)
    labels = np.repeat(np.arange(num_classes), per_class)
    features = means[labels] + noise_std * generator.normal(size=(labels.size, dim))
    return Batch(features, labels)


def build_user_models(
    dataset: Batch, user_indices: Sequence[NDArray[np.int64]], widths: Sequence[int]
) -> List[MlpEluModel]:
    """One network per user, each defined by its own slice of `dataset`.

    Raises:
        InvalidArgumentError: If a user holds no samples.
    """
    models = []
    for user, indices in enumerate(user_indices):
        if len(indices) == 0:
            raise InvalidArgumentError(f"User {user} holds no samples")
        models.append(MlpEluModel(widths, dataset.subset(indices)))
    return models
