"""Decorator functions used by the meta-gradient estimators."""

import functools
import logging
from typing import Callable

from perfedavg_simulator.common.errors import UnsupportedOperationError

logger = logging.getLogger(__name__)


def require_exact_oracle(func: Callable):
    """A decorator that asserts the model passed as first argument has exact oracles, analytic or
    through a full-batch evaluation set, before the wrapped function is executed.

    Args:
        func (Callable): The wrapped function. Its first positional argument is a `LossModel`.
    """

    def has_exact_oracle(model) -> bool:
        is_exact = model.has_exact_oracles
        logger.debug(f"Does {model.__class__.__name__} have exact oracles? {is_exact}")
        return is_exact

    @functools.wraps(func)
    def check(model, *args, **kwargs):
        if has_exact_oracle(model):
            return func(model, *args, **kwargs)
        logger.warning(f"An exact gradient path is required to invoke {func.__name__}")
        raise UnsupportedOperationError(
            f"{func.__name__} needs exact gradients, {model.__class__.__name__} has no analytic "
            "oracle and no evaluation set"
        )

    return check
