"""Two-group label-skew partition of a labeled pool across users.

Half of the users (group one) hold `a` samples of each of the first five classes. User n/2 + m
of group two holds a/2 samples of class m mod 5 and 2a samples of class 5 + (m mod 5). The
"diff-hetero" variant drops the a/2 block, so group two users only see the last five classes.
"""

import csv
import io
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from perfedavg_simulator.common.constants import CLASSES_PER_GROUP, NUM_CLASSES
from perfedavg_simulator.common.errors import DataShortageError, InvalidArgumentError
from perfedavg_simulator.common.utils import atomic_write_text, round_half_up
from perfedavg_simulator.kernel.rng import Purpose, RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PartitionSpec:
    """Layout of the two-group partition.

    Attributes:
        `n` (int): Number of users, even.
        `a` (int): Samples per class of group-one users, even unless `diff_hetero` is set.
        `diff_hetero` (bool): Drop the a/2 block of group-two users.
    """

    n: int
    a: int
    diff_hetero: bool = False

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise InvalidArgumentError(f"The partition needs an even user count, got n={self.n}")
        if self.a < 1:
            raise InvalidArgumentError(f"a must be positive, got {self.a}")
        if not self.diff_hetero and self.a % 2 != 0:
            raise InvalidArgumentError(
                f"a must be even so that a/2 is a sample count, got {self.a}"
            )

    def class_counts(self) -> NDArray[np.int64]:
        """The (n, 10) matrix of samples per user and class."""
        counts = np.zeros((self.n, NUM_CLASSES), dtype=np.int64)
        half = self.n // 2
        counts[:half, :CLASSES_PER_GROUP] = self.a
        for m in range(self.n - half):
            user = half + m
            if not self.diff_hetero:
                counts[user, m % CLASSES_PER_GROUP] = self.a // 2
            counts[user, CLASSES_PER_GROUP + m % CLASSES_PER_GROUP] = 2 * self.a
        return counts

    def scaled(self, ratio: float) -> "PartitionSpec":
        """The same layout with `a` scaled by `ratio`, rounded to an even count of at least 2."""
        a = max(2, 2 * round_half_up(self.a * ratio / 2.0))
        return PartitionSpec(n=self.n, a=a, diff_hetero=self.diff_hetero)


@dataclass(frozen=True)
class UserData:
    """Pool indices held by one user and the resulting per-class counts."""

    user: int
    indices: NDArray[np.int64]
    class_counts: NDArray[np.int64]


def partition_dataset(labels: ArrayLike, spec: PartitionSpec, rng: RngStream) -> List[UserData]:
    """Assigns disjoint samples of a labeled pool to users following `spec`.

    Each class's pool indices are shuffled by their own child stream, then carved in user order.

    Args:
        `labels` (ArrayLike): Class label of every pool sample; sample i has label labels[i].
        `spec` (PartitionSpec): The layout.
        `rng` (RngStream): Stream of the shuffles.

    Raises:
        DataShortageError: If the pool holds too few samples of a class, naming the class.

    Returns:
        List[UserData]: One entry per user, with sorted pool indices.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    counts = spec.class_counts()
    assigned: List[List[NDArray[np.int64]]] = [[] for _ in range(spec.n)]
    for label in range(NUM_CLASSES):
        needed = int(counts[:, label].sum())
        if needed == 0:
            continue
        pool = np.flatnonzero(labels == label)
        if pool.size < needed:
            raise DataShortageError(class_label=label, required=needed, available=int(pool.size))
        shuffled = rng.child(Purpose.PARTITION, label).generator().permutation(pool)
        offset = 0
        for user in range(spec.n):
            take = int(counts[user, label])
            assigned[user].append(shuffled[offset : offset + take])
            offset += take

    logger.debug(f"Partitioned {int(counts.sum())} samples across {spec.n} users")
    return [
        UserData(
            user=user,
            indices=np.sort(np.concatenate(parts)).astype(np.int64),
            class_counts=counts[user].copy(),
        )
        for user, parts in enumerate(assigned)
    ]


def partition_train_test(
    train_labels: ArrayLike,
    test_labels: ArrayLike,
    spec: PartitionSpec,
    rng: RngStream,
    test_ratio: Optional[float] = None,
) -> Tuple[List[UserData], List[UserData]]:
    """Partitions a train and a test pool with the same layout; the test layout scales `a` by
    `test_ratio`, by default the ratio of the pool sizes.

    Returns:
        Tuple[List[UserData], List[UserData]]: Train and test assignments.
    """
    train_labels = np.asarray(train_labels).reshape(-1)
    test_labels = np.asarray(test_labels).reshape(-1)
    if test_ratio is None:
        test_ratio = test_labels.size / max(1, train_labels.size)
    train = partition_dataset(train_labels, spec, rng.child(0))
    test = partition_dataset(test_labels, spec.scaled(test_ratio), rng.child(1))
    return train, test


def write_partition_csv(path: str, users: Sequence[UserData]) -> None:
    """Writes one (user_id, sample_index) row per assigned sample."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["user_id", "sample_index"])
    for user in users:
        for index in user.indices:
            writer.writerow([user.user, int(index)])
    atomic_write_text(path, buffer.getvalue())
    logger.info(f"Wrote partition of {len(users)} users to {path}")
