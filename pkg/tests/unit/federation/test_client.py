"""Tests classes and functions in perfedavg_simulator/federation/client.py"""

import numpy as np
import pytest

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.federation.client import fedavg_local_step, run_client
from perfedavg_simulator.federation.config import BetaSchedule, FederationConfig
from perfedavg_simulator.kernel.rng import RngStream
from perfedavg_simulator.metagrad.estimator_config import EstimatorKind, MetaEstimator
from perfedavg_simulator.objective.quadratic import QuadraticTask

A = np.diag([1.0, 2.0])
b = np.array([1.0, -1.0])


def make_config(algorithm, alpha=0.0, kind=EstimatorKind.FO):
    return FederationConfig(
        n=2,
        r=1.0,
        tau=4,
        K=1,
        beta=BetaSchedule(0.1),
        estimator=MetaEstimator(alpha=alpha, kind=kind, inner_batch=2, outer_batch=3),
        algorithm=algorithm,
        seed=11,
    )


def test_noiseless_fedavg_step_is_gradient_descent():
    task = QuadraticTask(A, b)
    w = np.array([0.5, 0.5])
    step = fedavg_local_step(task, w, 0.1, 4, RngStream.from_seed(0))
    assert np.allclose(step, w - 0.1 * (A @ w + b))


def test_fedavg_step_rejects_negative_beta():
    with pytest.raises(InvalidArgumentError):
        fedavg_local_step(QuadraticTask(A, b), np.zeros(2), -1.0, 1, RngStream.from_seed(0))


class TestRunClient:
    def test_trace_layout(self):
        task = QuadraticTask(A, b, grad_noise_std=0.1)
        w_k = np.array([1.0, 1.0])
        trace = run_client(task, w_k, make_config("perfedavg", 0.1), 0, 1, 0.1)
        assert trace.client_id == 1
        assert len(trace.iterates) == 5
        assert np.array_equal(trace.iterates[0], w_k)

    def test_fedavg_equals_first_order_at_zero_alpha(self):
        task = QuadraticTask(A, b, grad_noise_std=0.3, hess_noise_std=0.1)
        w_k = np.array([0.2, -0.4])
        fedavg = run_client(task, w_k, make_config("fedavg"), 2, 0, 0.1)
        first_order = run_client(task, w_k, make_config("perfedavg"), 2, 0, 0.1)
        for one, other in zip(fedavg.iterates, first_order.iterates):
            assert np.array_equal(one, other)

    def test_clients_draw_from_their_own_streams(self):
        task = QuadraticTask(A, b, grad_noise_std=0.3)
        w_k = np.zeros(2)
        cfg = make_config("perfedavg", 0.1)
        first = run_client(task, w_k, cfg, 0, 0, 0.1)
        second = run_client(task, w_k, cfg, 0, 1, 0.1)
        assert not np.array_equal(first.iterates[-1], second.iterates[-1])
