"""Data records consumed by loss models: single samples and batches of samples."""

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.utils import ensure_finite


@dataclass(frozen=True)
class Sample:
    """One data point (x, y). `y` is an integer class id for classifiers and unused (zero) for
    tasks whose samples are pure noise draws.
    """

    x: NDArray[np.float64]
    y: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        ensure_finite(x, "sample features")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", int(self.y))


class Batch:
    """A nonempty batch of samples stored column-wise: features of shape (size, p) and integer
    labels of shape (size,).
    """

    def __init__(self, features: ArrayLike, labels: ArrayLike = None):
        """Initializes an instance of `Batch`.

        Args:
            `features` (ArrayLike): Feature matrix, one row per sample.
            `labels` (ArrayLike, optional): One label per sample. Defaults to all zeros.

        Raises:
            InvalidArgumentError: If the batch is empty or the shapes disagree.
        """
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, np.newaxis]
        if features.ndim != 2 or features.shape[0] == 0:
            raise InvalidArgumentError(
                f"A batch needs at least one sample, got shape {features.shape}"
            )
        if labels is None:
            labels = np.zeros(features.shape[0], dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != features.shape[0]:
            raise InvalidArgumentError(
                f"Got {features.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        ensure_finite(features, "batch features")
        self.__features = features
        self.__labels = labels

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Batch":
        if len(samples) == 0:
            raise InvalidArgumentError("A batch needs at least one sample")
        return cls(np.stack([s.x for s in samples]), np.array([s.y for s in samples]))

    def samples(self) -> Iterator[Sample]:
        for x, y in zip(self.__features, self.__labels):
            yield Sample(x=x, y=int(y))

    def subset(self, indices: ArrayLike) -> "Batch":
        indices = np.asarray(indices, dtype=np.int64)
        return Batch(self.__features[indices], self.__labels[indices])

    def concat(self, other: "Batch") -> "Batch":
        return Batch(
            np.concatenate([self.__features, other.features]),
            np.concatenate([self.__labels, other.labels]),
        )

    @property
    def features(self) -> NDArray[np.float64]:
        return self.__features

    @property
    def labels(self) -> NDArray[np.int64]:
        return self.__labels

    @property
    def size(self) -> int:
        return self.__features.shape[0]

    def __len__(self) -> int:
        return self.size
