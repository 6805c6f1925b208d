"""Useful functions that could be used anywhere in the perfedavg simulator package."""

import math
import os
import tempfile
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from perfedavg_simulator.common.errors import InvalidArgumentError, NumericError
from perfedavg_simulator.common.types import ParamVector, Scalar


def as_param_vector(data: ArrayLike, dim: Union[int, None] = None) -> ParamVector:
    """Converts array-like data into a finite, read-only, one dimensional float64 vector.

    Args:
        `data` (ArrayLike): Coordinates of the vector.
        `dim` (Union[int, None], optional): Expected dimension. Checked when given.

    Raises:
        InvalidArgumentError: If the data is not one dimensional, is empty, or has the wrong
            dimension.
        NumericError: If any coordinate is NaN or infinite.

    Returns:
        ParamVector: A copy of the data that cannot be modified in place.
    """
    vector = np.array(data, dtype=np.float64, copy=True)
    if vector.ndim != 1 or vector.size == 0:
        raise InvalidArgumentError(f"Expected a nonempty 1-d vector, got shape {vector.shape}")
    if dim is not None and vector.size != dim:
        raise InvalidArgumentError(f"Expected dimension {dim}, got {vector.size}")
    ensure_finite(vector, "vector")
    vector.flags.writeable = False
    return vector


def ensure_finite(value: Union[Scalar, np.ndarray], what: str = "value") -> None:
    """Raises if a scalar or array holds a NaN or infinite entry.

    Args:
        `value` (Union[Scalar, np.ndarray]): Quantity to check.
        `what` (str, optional): Name used in the error message. Defaults to "value".

    Raises:
        NumericError: If the check fails.
    """
    if not np.all(np.isfinite(value)):
        raise NumericError(f"Non-finite {what} encountered")


def check_same_dim(expected: int, vector: np.ndarray, what: str = "vector") -> None:
    if vector.ndim != 1 or vector.shape[0] != expected:
        raise InvalidArgumentError(
            f"Dimension mismatch for {what}: expected {expected}, got shape {vector.shape}"
        )


def round_half_up(value: float) -> int:
    """Rounds to the nearest integer with ties going up, unlike Python's banker's rounding."""
    return int(math.floor(value + 0.5))


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Writes a file by writing a temporary sibling and renaming it over the target, so readers
    never observe a partially written file.

    Args:
        `path` (str): Destination path. Parent directories are created when missing.
        `payload` (bytes): File contents.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as tmp_file:
            tmp_file.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
