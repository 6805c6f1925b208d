"""Counter-based random streams keyed by a root seed and a path of integer tags.

Every random draw of a run comes from a stream whose path names where the draw happens, e.g.
(scope, round, client, local step, purpose). Streams are derived, never advanced by other
streams, so the draws of one client do not depend on how many draws another client made or on
the order in which clients are evaluated.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple

import numpy as np

from perfedavg_simulator.common.errors import InvalidArgumentError

_SEED_MASK = (1 << 64) - 1


class Scope(IntEnum):
    """Top-level tag separating the stream trees of different subsystems."""

    SERVER = 0
    CLIENT = 1
    DIAGNOSTICS = 2
    SETUP = 3


class Purpose(IntEnum):
    """Last path tag of a stream: what the draws are used for."""

    SELECTION = 0
    REPORT = 1
    INNER_GRAD = 2
    OUTER_GRAD = 3
    HESSIAN = 4
    FEDAVG = 5
    PERSONALIZE = 6
    INIT = 7
    PARTITION = 8
    PROBE = 9
    MONTE_CARLO = 10
    FEDERATION = 11
    DATA = 12


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream. Two streams with equal `root_seed` and `path` produce
    identical sequences; streams with different paths are independent for test purposes.

    Attributes:
        `root_seed` (int): Unsigned 64-bit seed of the whole run.
        `path` (Tuple[int, ...]): Nonnegative integer tags identifying the stream.
    """

    root_seed: int
    path: Tuple[int, ...] = ()

    def __post_init__(self):
        if not isinstance(self.root_seed, (int, np.integer)) or isinstance(self.root_seed, bool):
            raise InvalidArgumentError(f"root_seed must be an integer, got {self.root_seed!r}")
        if not 0 <= int(self.root_seed) <= _SEED_MASK:
            raise InvalidArgumentError(
                f"root_seed must fit in 64 unsigned bits, got {self.root_seed}"
            )
        path = tuple(int(tag) for tag in self.path)
        if any(tag < 0 for tag in path):
            raise InvalidArgumentError(f"Stream path tags must be nonnegative, got {path}")
        object.__setattr__(self, "root_seed", int(self.root_seed))
        object.__setattr__(self, "path", path)

    @classmethod
    def from_seed(cls, seed: int) -> "RngStream":
        """Creates a root stream, wrapping negative seeds into the unsigned 64-bit range."""
        return cls(root_seed=int(seed) & _SEED_MASK)

    def child(self, *tags: int) -> "RngStream":
        """Derives the stream whose path extends this stream's path by `tags`.

        Args:
            `*tags` (int): Tags to append, e.g. a round index and a `Purpose`.

        Returns:
            RngStream: The derived stream. Deriving is pure and does not consume draws.
        """
        return RngStream(root_seed=self.root_seed, path=self.path + tuple(int(t) for t in tags))

    def generator(self) -> np.random.Generator:
        """Returns a fresh generator positioned at the start of this stream. Every call replays
        the same sequence.

        Returns:
            np.random.Generator: A Philox-backed generator seeded by (root_seed, path).
        """
        seed_sequence = np.random.SeedSequence(entropy=self.root_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seed_sequence))


def client_stream(root: RngStream, round_index: int, client_id: int, step: int) -> RngStream:
    """Stream of one local step of a client inside a federation round. Estimators append a
    `Purpose` tag per batch they draw.

    Args:
        `root` (RngStream): Root stream of the run.
        `round_index` (int): Round k.
        `client_id` (int): Client i.
        `step` (int): Local step t.

    Returns:
        RngStream: The stream at path (CLIENT, k, i, t) below `root`.
    """
    return root.child(Scope.CLIENT, round_index, client_id, step)


def server_stream(root: RngStream, round_index: int, purpose: Purpose) -> RngStream:
    return root.child(Scope.SERVER, round_index, purpose)
