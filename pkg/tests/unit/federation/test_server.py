"""Tests classes and functions in perfedavg_simulator/federation/server.py"""

from dataclasses import replace

import numpy as np
import pytest

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.federation.closed_form import minimize_F_closed_form
from perfedavg_simulator.federation.config import BetaSchedule, FederationConfig
from perfedavg_simulator.federation.server import (
    FederationServer,
    pick_report_index,
    run_round,
    run_training,
)
from perfedavg_simulator.kernel.rng import RngStream
from perfedavg_simulator.metagrad.estimator_config import EstimatorKind, MetaEstimator
from perfedavg_simulator.objective.quadratic import make_synthetic_federation


@pytest.fixture
def noisy_tasks():
    return make_synthetic_federation(6, 3, (0.5, 0.2), (0.2, 0.1), RngStream.from_seed(2))


@pytest.fixture
def cfg():
    return FederationConfig(
        n=6,
        r=0.5,
        tau=3,
        K=4,
        beta=BetaSchedule(0.05),
        estimator=MetaEstimator(alpha=0.1, inner_batch=2, outer_batch=2, hessian_batch=2),
        seed=21,
    )


def server_models(history):
    return [record.server_model for record in history]


class TestRunRound:
    def test_record_layout(self, noisy_tasks, cfg):
        w_k = np.ones(3)
        record = run_round(w_k, noisy_tasks, cfg, 0)
        assert record.active.size == cfg.active_count == 3
        assert 0 <= record.report_index < cfg.tau
        assert len(record.mid_averages) == cfg.tau + 1
        assert np.array_equal(record.mid_averages[0], w_k)
        assert np.array_equal(record.server_model, record.mid_averages[-1])
        assert len(record.stationarity) == cfg.tau + 1
        assert record.report_stationarity == record.stationarity[record.report_index]
        assert record.drift.population == "active"
        assert record.drift.mean_sq_norm[0] == 0.0

    def test_drift_over_all_clients(self, noisy_tasks, cfg):
        w_k = np.zeros(3)
        active_only = run_round(w_k, noisy_tasks, cfg, 1)
        traced = run_round(w_k, noisy_tasks, replace(cfg, trace_all_clients=True), 1)
        assert traced.drift.population == "all"
        assert np.array_equal(active_only.server_model, traced.server_model)
        assert active_only.active == traced.active

    def test_stationarity_can_be_skipped(self, noisy_tasks, cfg):
        record = run_round(np.zeros(3), noisy_tasks, replace(cfg, track_stationarity=False), 0)
        assert record.stationarity == []
        assert record.report_stationarity is None

    def test_rejects_wrong_dimension(self, noisy_tasks, cfg):
        with pytest.raises(InvalidArgumentError):
            run_round(np.zeros(2), noisy_tasks, cfg, 0)


class TestFederationServer:
    def test_rejects_mismatched_tasks(self, noisy_tasks, cfg):
        with pytest.raises(InvalidArgumentError):
            FederationServer(noisy_tasks[:5], cfg)
        mixed = noisy_tasks[:5] + make_synthetic_federation(
            2, 2, (0.1, 0.1), (0.0, 0.0), RngStream.from_seed(0)
        )[:1]
        with pytest.raises(InvalidArgumentError):
            FederationServer(mixed, cfg)

    def test_selection_is_reproducible(self, noisy_tasks, cfg):
        server = FederationServer(noisy_tasks, cfg)
        assert server.select_clients(3) == server.select_clients(3)
        assert server.select_clients(3).size == 3

    def test_initial_point_of_quadratics(self, noisy_tasks, cfg):
        assert np.array_equal(FederationServer(noisy_tasks, cfg).initial_point(), np.zeros(3))


class TestRunTraining:
    def test_seed_replays(self, noisy_tasks, cfg):
        first = run_training(noisy_tasks, cfg)
        second = run_training(noisy_tasks, cfg)
        for one, other in zip(server_models(first), server_models(second)):
            assert np.array_equal(one, other)

    def test_worker_count_does_not_change_results(self, noisy_tasks, cfg):
        sequential = run_training(noisy_tasks, cfg)
        pooled = run_training(noisy_tasks, replace(cfg, workers=3))
        for one, other in zip(sequential, pooled):
            assert one.active == other.active
            assert one.report_index == other.report_index
            assert np.array_equal(one.server_model, other.server_model)
            assert one.stationarity == other.stationarity

    def test_seed_changes_results(self, noisy_tasks, cfg):
        first = run_training(noisy_tasks, cfg)[-1].server_model
        second = run_training(noisy_tasks, replace(cfg, seed=22))[-1].server_model
        assert not np.array_equal(first, second)

    def test_callback_and_model_retention(self, noisy_tasks, cfg):
        seen = []
        history = run_training(
            noisy_tasks, replace(cfg, retain_models=False), on_round=seen.append
        )
        assert [record.k for record in seen] == list(range(cfg.K))
        assert all(record.server_model is None for record in history[:-1])
        assert history[-1].server_model is not None

    def test_exact_full_participation_reaches_closed_form(self):
        tasks = make_synthetic_federation(3, 2, (0.5, 0.1), (0.0, 0.0), RngStream.from_seed(4))
        cfg = FederationConfig(
            n=3,
            r=1.0,
            tau=1,
            K=300,
            beta=BetaSchedule(0.3),
            estimator=MetaEstimator(alpha=0.1, kind=EstimatorKind.EXACT),
            track_stationarity=False,
            retain_models=False,
        )
        w_final = run_training(tasks, cfg)[-1].server_model
        assert np.allclose(w_final, minimize_F_closed_form(tasks, 0.1), atol=1e-8)


class TestPickReportIndex:
    def test_range_and_uniformity(self):
        root = RngStream.from_seed(8)
        draws = np.array([pick_report_index(4, root.child(k)) for k in range(4000)])
        assert draws.min() == 0 and draws.max() == 3
        assert np.allclose(np.bincount(draws) / 4000, 0.25, atol=0.03)

    def test_rejects_zero_tau(self):
        with pytest.raises(InvalidArgumentError):
            pick_report_index(0, RngStream.from_seed(0))
