"""Tests classes and functions in perfedavg_simulator/kernel/rng.py"""

import numpy as np
import pytest

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.kernel.rng import Purpose, RngStream, Scope, client_stream, server_stream


class TestRngStream:
    def test_equal_paths_replay(self):
        first = RngStream(root_seed=7, path=(1, 2, 3)).generator().random(16)
        second = RngStream(root_seed=7, path=(1, 2, 3)).generator().random(16)
        assert np.array_equal(first, second)

    def test_generator_restarts_every_call(self):
        stream = RngStream.from_seed(11)
        assert np.array_equal(stream.generator().normal(size=4), stream.generator().normal(size=4))

    @pytest.mark.parametrize("other", [(1, 2, 4), (1, 2), (1, 2, 3, 5), ()])
    def test_different_paths_differ(self, other):
        base = RngStream(root_seed=7, path=(1, 2, 3)).generator().random(16)
        assert not np.array_equal(base, RngStream(root_seed=7, path=other).generator().random(16))

    def test_different_seeds_differ(self):
        first = RngStream.from_seed(1).generator().random(8)
        assert not np.array_equal(first, RngStream.from_seed(2).generator().random(8))

    def test_child_is_pure(self):
        root = RngStream.from_seed(3)
        child = root.child(Scope.CLIENT, 4)
        assert child.path == (int(Scope.CLIENT), 4)
        assert root.path == ()
        assert child == RngStream(3, (int(Scope.CLIENT), 4))

    def test_from_seed_wraps_negative(self):
        assert RngStream.from_seed(-1).root_seed == (1 << 64) - 1

    @pytest.mark.parametrize(
        "seed, path",
        [(-1, ()), (1 << 64, ()), (1.5, ()), (True, ()), (0, (-1,))],
    )
    def test_rejects_invalid(self, seed, path):
        with pytest.raises(InvalidArgumentError):
            RngStream(root_seed=seed, path=path)


def test_client_stream_path():
    stream = client_stream(RngStream.from_seed(5), round_index=2, client_id=3, step=1)
    assert stream.path == (int(Scope.CLIENT), 2, 3, 1)


def test_server_stream_path():
    stream = server_stream(RngStream.from_seed(5), 4, Purpose.SELECTION)
    assert stream.path == (int(Scope.SERVER), 4, int(Purpose.SELECTION))


def test_client_streams_do_not_depend_on_draw_order():
    root = RngStream.from_seed(9)
    forward = [client_stream(root, 0, i, 0).generator().random(3) for i in range(5)]
    backward = [client_stream(root, 0, i, 0).generator().random(3) for i in reversed(range(5))]
    for i in range(5):
        assert np.array_equal(forward[i], backward[4 - i])
