"""Exception hierarchy shared by every subpackage of the perfedavg simulator."""

from contextlib import contextmanager
from typing import Iterator, Optional

import numpy as np


class PerFedAvgError(Exception):
    """Base class of every error raised on purpose by this package."""


class InvalidArgumentError(PerFedAvgError, ValueError):
    """An argument violates the documented precondition of an operation."""


class DataShortageError(InvalidArgumentError):
    """A data pool does not hold enough samples of a class to satisfy a partition.

    Attributes:
        `class_label` (int): The class that ran out of samples.
        `required` (int): Number of samples the partition needs from that class.
        `available` (int): Number of samples the pool holds for that class.
    """

    def __init__(self, class_label: int, required: int, available: int):
        super().__init__(
            f"Class {class_label} needs {required} samples but only {available} are available"
        )
        self.class_label = class_label
        self.required = required
        self.available = available


class MissingConstantError(InvalidArgumentError):
    """A closed-form bound needs a constant that was never declared or estimated."""

    def __init__(self, name: str, needed_by: str = ""):
        suffix = f" (needed by {needed_by})" if needed_by else ""
        super().__init__(f"Constant `{name}` is missing{suffix}")
        self.name = name


class SingularSystemError(InvalidArgumentError):
    """A linear system that should define a unique stationary point is singular."""


class UnsupportedOperationError(PerFedAvgError, NotImplementedError):
    """The operation needs an oracle the model does not provide."""


class HypothesisViolationError(PerFedAvgError, ValueError):
    """Parameters fall outside the hypothesis under which a bound was derived."""


class NumericError(PerFedAvgError, ArithmeticError):
    """A non-finite value (NaN or Inf) was produced or consumed."""


class DataError(PerFedAvgError, IOError):
    """A dataset file is missing or malformed."""


class ConfigError(PerFedAvgError, ValueError):
    """A run configuration could not be parsed or failed validation.

    Attributes:
        `field` (Optional[str]): Dotted name of the offending field, if known.
        `line` (Optional[int]): 1-based line number of a syntax error, if known.
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if line is not None:
            location = f"line {line}: "
        elif field is not None:
            location = f"{field}: "
        super().__init__(location + message)
        self.field = field
        self.line = line


@contextmanager
def numeric_errors(context: str) -> Iterator[None]:
    """Re-raises numpy linear algebra and floating-point failures inside the block as
    `NumericError`, naming `context`."""
    try:
        yield
    except (np.linalg.LinAlgError, FloatingPointError) as error:
        raise NumericError(f"{context} failed: {error}") from error
