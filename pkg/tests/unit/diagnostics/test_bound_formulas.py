"""Tests classes and functions in perfedavg_simulator/diagnostics/bound_formulas.py"""

import math

import pytest

from perfedavg_simulator.common.errors import (
    HypothesisViolationError,
    InvalidArgumentError,
    MissingConstantError,
)
from perfedavg_simulator.diagnostics.bound_formulas import (
    BoundFormulas,
    corollary_schedule,
    derived_constants,
    drift_bounds,
    estimator_error_terms,
    theorem_rhs,
)
from perfedavg_simulator.diagnostics.constant_set import ConstantSet
from perfedavg_simulator.metagrad.estimator_config import EstimatorKind


@pytest.fixture
def constants():
    return ConstantSet(
        B=1.0,
        L=1.0,
        rho=0.0,
        sigma_G=0.0,
        sigma_H=0.0,
        gamma_G=0.0,
        gamma_H=0.0,
        alpha=0.1,
        beta=0.01,
        tau=2,
        K=10,
        n=10,
        r=0.5,
        D=1,
        D_prime=1,
        D_dprime=1,
    )


class TestBoundFormulas:
    def test_meta_smoothness_without_inner_step(self):
        assert BoundFormulas.meta_smoothness(L=2.0, rho=5.0, alpha=0.0, B=3.0) == 8.0
        assert BoundFormulas.meta_smoothness(L=1.0, rho=2.0, alpha=0.1, B=3.0) == pytest.approx(4.6)

    def test_meta_dissimilarity_without_inner_step(self):
        assert BoundFormulas.meta_dissimilarity(B=3.0, alpha=0.0, gamma_G=0.5, gamma_H=9.0) == 48.0
        assert BoundFormulas.meta_dissimilarity(2.0, 0.5, 0.0, 0.0) == 0.0

    def test_noiseless_stochastic_variance_vanishes(self):
        value = BoundFormulas.stochastic_variance(3.0, 2.0, 0.2, 0.0, 0.0, 1, 1, 1)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_stochastic_variance_grows_with_noise(self):
        low = BoundFormulas.stochastic_variance(1.0, 1.0, 0.1, 0.1, 0.1, 4, 4, 4)
        high = BoundFormulas.stochastic_variance(1.0, 1.0, 0.1, 0.5, 0.1, 4, 4, 4)
        assert 0.0 < low < high

    def test_hand_computed_values(self):
        assert BoundFormulas.stochastic_bias(0.1, 2.0, 0.5, 4) == pytest.approx(0.1)
        assert BoundFormulas.fo_bias(0.1, 2.0, 0.5, 1.0, 4) == pytest.approx(0.25)
        assert BoundFormulas.fo_variance(0.1, 2.0, 0.5, 1.0, 4, 2) == pytest.approx(0.335)
        assert BoundFormulas.hf_bias(0.1, 2.0, 1.0, 0.5, 1.0, 0.01, 4, 1) == pytest.approx(0.201)
        assert BoundFormulas.hf_variance(0.1, 2.0, 1.0, 0.0, 1.0, 0.01, 4, 1, 1) == pytest.approx(
            2e-6
        )
        assert BoundFormulas.drift_first_moment(0.1, 3, 1.0, 2.0) == pytest.approx(3.6)
        assert BoundFormulas.drift_second_moment(0.1, 2, 5, 1.0, 2.0) == pytest.approx(14.0)

    @pytest.mark.parametrize(
        "n, r, expected", [(10, 0.5, 1.0 / 9.0), (10, 1.0, 0.0), (1, 0.5, 0.0)]
    )
    def test_sampling_factor(self, n, r, expected):
        assert BoundFormulas.sampling_factor(n, r) == pytest.approx(expected)

    def test_stationarity_noise(self):
        value = BoundFormulas.stationarity_noise(0.01, 4.0, 3, 10, 0.5, 1.0, 2.0, 0.5)
        drift = 280.0 * 0.04**2 * 3 * 2 * 4.0
        sampling = 0.04 * (2.0 + 2.0 / 9.0)
        assert value == pytest.approx(drift + sampling + 0.5)

    def test_single_local_step_has_no_drift_term(self):
        value = BoundFormulas.stationarity_noise(0.01, 4.0, 1, 10, 1.0, 1.0, 2.0, 0.0)
        assert value == pytest.approx(0.04 * 2.0)


class TestDerivedConstants:
    def test_without_inner_step(self, constants):
        c = constants.with_values(alpha=0.0, gamma_G=0.5, rho=3.0)
        derived = derived_constants(c)
        assert derived.L_F == 4.0
        assert derived.gamma_F_sq == pytest.approx(192.0 * 0.25)
        assert derived.sigma_F_sq == pytest.approx(0.0, abs=1e-12)
        assert derived.m_F_hf is None and derived.sigma_F_hf_sq is None

    def test_hessian_free_terms_need_delta(self, constants):
        assert derived_constants(constants.with_values(delta=0.01)).m_F_hf is not None
        with pytest.raises(MissingConstantError) as raised:
            estimator_error_terms(constants, derived_constants(constants), EstimatorKind.HF)
        assert raised.value.name == "delta"

    def test_names_missing_constant(self, constants):
        with pytest.raises(MissingConstantError) as raised:
            derived_constants(constants.with_values(gamma_H=None))
        assert raised.value.name == "gamma_H"

    def test_exact_estimator_has_no_error_terms(self, constants):
        derived = derived_constants(constants.with_values(sigma_G=1.0))
        assert estimator_error_terms(constants, derived, EstimatorKind.EXACT) == (0.0, 0.0)

    def test_first_order_error_terms(self, constants):
        c = constants.with_values(sigma_G=0.5)
        derived = derived_constants(c)
        error_sq, bias_term = estimator_error_terms(c, derived, "fo")
        assert error_sq == derived.sigma_F_fo_sq
        assert bias_term == pytest.approx(4.0 * derived.m_F_fo**2)


class TestTheoremRhs:
    def test_exact_homogeneous_case(self, constants):
        rhs = theorem_rhs(constants, 2.0, EstimatorKind.EXACT)
        assert rhs == pytest.approx(4.0 * 2.0 / (0.01 * 2 * 10))

    def test_noise_raises_the_bound(self, constants):
        clean = theorem_rhs(constants, 1.0)
        noisy = theorem_rhs(constants.with_values(sigma_G=0.5, gamma_G=0.2), 1.0)
        assert noisy > clean

    def test_rejects_large_beta(self, constants):
        # L_F = 4 and tau = 2 admit beta <= 1/80
        theorem_rhs(constants.with_values(beta=0.0125), 1.0)
        with pytest.raises(HypothesisViolationError):
            theorem_rhs(constants.with_values(beta=0.013), 1.0)

    def test_rejects_negative_gap(self, constants):
        with pytest.raises(InvalidArgumentError):
            theorem_rhs(constants, -1.0)

    def test_missing_constant(self, constants):
        with pytest.raises(MissingConstantError):
            theorem_rhs(constants.with_values(K=None), 1.0)


class TestDriftBounds:
    def test_zero_at_first_step(self, constants):
        assert drift_bounds(constants.with_values(sigma_G=1.0, gamma_G=1.0), 0) == (0.0, 0.0)

    def test_values(self, constants):
        c = constants.with_values(gamma_G=0.5)
        gamma_F_sq = 192.0 * 0.25
        first, second = drift_bounds(c, 2, EstimatorKind.EXACT)
        assert first == pytest.approx(4.0 * 0.01 * 2 * math.sqrt(gamma_F_sq))
        assert second == pytest.approx(35.0 * 0.01**2 * 2 * 2 * gamma_F_sq)

    def test_rejects_large_beta(self, constants):
        with pytest.raises(HypothesisViolationError):
            drift_bounds(constants.with_values(beta=0.1), 1)


class TestCorollarySchedule:
    @pytest.mark.parametrize(
        "epsilon, expected", [(0.01, (10, 1000, 0.01)), (0.25, (2, 8, 0.25)), (1.0, (1, 1, 1.0))]
    )
    def test_values(self, epsilon, expected):
        assert tuple(corollary_schedule(epsilon)) == expected

    def test_rounds_up(self):
        schedule = corollary_schedule(0.3)
        assert schedule.tau == 2
        assert schedule.K == math.ceil(0.3**-1.5)

    @pytest.mark.parametrize("epsilon", [0.0, -0.1, 1.5])
    def test_rejects_epsilon(self, epsilon):
        with pytest.raises(InvalidArgumentError):
            corollary_schedule(epsilon)


class TestTheoremRhsMonotonicity:
    @pytest.fixture
    def noisy(self, constants):
        return constants.with_values(sigma_G=0.3, sigma_H=0.2, gamma_G=0.2, gamma_H=0.1, D=4)

    @pytest.mark.parametrize("name, larger", [("K", 40), ("D", 16)])
    def test_nonincreasing(self, noisy, name, larger):
        assert theorem_rhs(noisy.with_values(**{name: larger}), 1.0) <= theorem_rhs(noisy, 1.0)

    @pytest.mark.parametrize("name", ["sigma_G", "gamma_G", "gamma_H"])
    def test_nondecreasing(self, noisy, name):
        larger = noisy.with_values(**{name: 2.0 * getattr(noisy, name)})
        assert theorem_rhs(larger, 1.0) >= theorem_rhs(noisy, 1.0)
