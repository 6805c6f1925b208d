"""Tests classes and functions in perfedavg_simulator/common/utils.py"""

import os

import numpy as np
import pytest

from perfedavg_simulator.common import utils
from perfedavg_simulator.common.errors import ConfigError, InvalidArgumentError, NumericError


class TestAsParamVector:
    def test_copies_and_freezes(self):
        data = [1.0, 2.0, 3.0]
        vector = utils.as_param_vector(data)
        assert vector.dtype == np.float64
        assert not vector.flags.writeable
        with pytest.raises(ValueError):
            vector[0] = 5.0

    @pytest.mark.parametrize("data", [[], [[1.0, 2.0]], 3.0])
    def test_rejects_bad_shapes(self, data):
        with pytest.raises(InvalidArgumentError):
            utils.as_param_vector(data)

    def test_rejects_wrong_dimension(self):
        with pytest.raises(InvalidArgumentError):
            utils.as_param_vector([1.0, 2.0], dim=3)

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(NumericError):
            utils.as_param_vector([0.0, bad])


@pytest.mark.parametrize(
    "value, expected",
    [(0.5, 1), (1.5, 2), (2.5, 3), (2.49, 2), (-0.5, 0), (-1.5, -1), (4.0, 4)],
)
def test_round_half_up(value, expected):
    assert utils.round_half_up(value) == expected


def test_ensure_finite_accepts_finite_arrays():
    utils.ensure_finite(np.array([0.0, 1.0e300, -2.0]))


def test_check_same_dim():
    utils.check_same_dim(3, np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        utils.check_same_dim(3, np.zeros(2), "direction")


class TestAtomicWrite:
    def test_writes_and_replaces(self, tmp_path):
        path = os.path.join(tmp_path, "nested", "out.txt")
        utils.atomic_write_text(path, "first")
        utils.atomic_write_text(path, "second")
        with open(path, encoding="utf-8") as written:
            assert written.read() == "second"
        assert not [name for name in os.listdir(os.path.dirname(path)) if name.startswith(".tmp-")]


def test_config_error_names_field_or_line():
    error = ConfigError("must be positive", field="federation.n")
    assert str(error) == "federation.n: must be positive"
    assert str(ConfigError("bad indent", line=3)).startswith("line 3: ")
