"""Writers of run artifacts: the JSON-lines round log and the final-model blob. Every file is
written to a temporary sibling and renamed into place on completion."""

import json
import logging
import os
import struct
import tempfile
from typing import Any, Dict, Optional

import numpy as np

from perfedavg_simulator.common.errors import DataError
from perfedavg_simulator.common.types import ParamVector
from perfedavg_simulator.common.utils import atomic_write_bytes, atomic_write_text, ensure_finite
from perfedavg_simulator.federation.round_data import RoundRecord

logger = logging.getLogger(__name__)

_BLOB_HEADER = struct.Struct("<I")


def _warn_if_exists(path: str) -> None:
    if os.path.exists(path):
        logger.warning(f"File {path} already exists. Overwriting old file...")


class JsonLinesWriter:
    """Writes one JSON object per line into a temporary file that replaces `path` on close. A
    writer closed after an error leaves any existing file at `path` untouched.

    Attributes:
        `path` (str): Final location of the file.
    """

    def __init__(self, path: str):
        self.__path = path
        _warn_if_exists(path)
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, self.__tmp_path = tempfile.mkstemp(
            dir=directory, prefix=".tmp-", suffix=os.path.basename(path)
        )
        self.__file: Optional[Any] = os.fdopen(fd, "w", encoding="utf-8")

    def write(self, entry: Dict[str, Any]) -> None:
        if self.__file is None:
            raise ValueError(f"Writer for {self.__path} is closed")
        self.__file.write(json.dumps(entry, sort_keys=True) + "\n")

    def close(self, commit: bool = True) -> None:
        if self.__file is None:
            return
        self.__file.close()
        self.__file = None
        if commit:
            os.replace(self.__tmp_path, self.__path)
            logger.info(f"Wrote {self.__path}")
        else:
            os.remove(self.__tmp_path)

    def __enter__(self) -> "JsonLinesWriter":
        return self

    def __exit__(self, exc_type, exc, traceback) -> None:
        self.close(commit=exc_type is None)

    @property
    def path(self) -> str:
        return self.__path


class RoundLogWriter(JsonLinesWriter):
    """JSON-lines writer of `RoundRecord`s, usable directly as a `run_training` callback.

    Extends: JsonLinesWriter
    """

    def __call__(self, record: RoundRecord) -> None:
        self.write(record.to_log_entry())


def write_json(path: str, payload: Any) -> None:
    _warn_if_exists(path)
    atomic_write_text(path, json.dumps(payload, indent=4, sort_keys=True) + "\n")


def write_model_blob(path: str, w: ParamVector) -> None:
    """Writes a model as an unsigned 32-bit little-endian dimension header followed by the
    coordinates as 64-bit little-endian floats.

    Raises:
        NumericError: If the model is not finite.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    ensure_finite(w, "model")
    _warn_if_exists(path)
    atomic_write_bytes(path, _BLOB_HEADER.pack(w.size) + w.astype("<f8").tobytes())


def read_model_blob(path: str) -> ParamVector:
    """Reads a model written by `write_model_blob`.

    Raises:
        DataError: If the file is missing or its size disagrees with its header.
    """
    if not os.path.isfile(path):
        raise DataError(f"Model blob not found: {path}")
    with open(path, "rb") as blob:
        payload = blob.read()
    if len(payload) < _BLOB_HEADER.size:
        raise DataError(f"{path} is too short to hold a model header")
    (dim,) = _BLOB_HEADER.unpack_from(payload)
    body = payload[_BLOB_HEADER.size :]
    if len(body) != 8 * dim:
        raise DataError(f"{path} declares {dim} coordinates but holds {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)
