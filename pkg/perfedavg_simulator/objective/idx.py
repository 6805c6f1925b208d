"""Reader of IDX files, the container format of the MNIST distribution.

An IDX file starts with a 4-byte magic number (two zero bytes, a data type code and the number
of dimensions), followed by one unsigned 32-bit big-endian size per dimension and the payload.
Only unsigned byte payloads are supported, which covers image (0x00000803) and label
(0x00000801) files.
"""

import gzip
import logging
import os
import struct
from typing import BinaryIO

import numpy as np
from numpy.typing import NDArray

from perfedavg_simulator.common.errors import DataError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
_UNSIGNED_BYTE = 0x08


def _open(path: str) -> BinaryIO:
    if path.endswith(".gz"):
        return gzip.open(path, "rb")  # type: ignore
    return open(path, "rb")


def read_idx(path: str) -> NDArray[np.uint8]:
    """Reads an unsigned-byte IDX file, plain or gzip-compressed.

    Args:
        `path` (str): Path to the file.

    Raises:
        DataError: If the file is missing, truncated, or not an unsigned-byte IDX file.

    Returns:
        NDArray[np.uint8]: The payload with the shape declared in the header.
    """
    if not os.path.isfile(path):
        raise DataError(f"IDX file not found: {path}")
    logger.debug(f"Reading IDX file {path}")
    try:
        with _open(path) as stream:
            header = stream.read(4)
            if len(header) != 4 or header[0] != 0 or header[1] != 0:
                raise DataError(f"{path} does not start with an IDX magic number")
            if header[2] != _UNSIGNED_BYTE:
                raise DataError(f"{path} has unsupported IDX data type 0x{header[2]:02x}")
            ndims = header[3]
            raw_dims = stream.read(4 * ndims)
            if len(raw_dims) != 4 * ndims:
                raise DataError(f"{path} has a truncated header")
            dims = struct.unpack(">" + "I" * ndims, raw_dims)
            payload = stream.read()
    except (OSError, EOFError) as error:
        raise DataError(f"Could not read {path}: {error}") from error

    expected = int(np.prod(dims)) if dims else 1
    if len(payload) != expected:
        raise DataError(f"{path} declares {expected} bytes of data but holds {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def read_images(path: str) -> NDArray[np.float64]:
    """Reads an image file and returns one flattened row per image, pixels scaled to [0, 1]."""
    images = read_idx(path)
    if images.ndim != 3:
        raise DataError(f"{path} is not an image file (magic 0x{IMAGES_MAGIC:08x})")
    return images.reshape(images.shape[0], -1).astype(np.float64) / 255.0


def read_labels(path: str) -> NDArray[np.int64]:
    labels = read_idx(path)
    if labels.ndim != 1:
        raise DataError(f"{path} is not a label file (magic 0x{LABELS_MAGIC:08x})")
    return labels.astype(np.int64)
