"""Tests classes and functions in perfedavg_simulator/heterogeneity/distributions.py"""

import numpy as np
import pytest

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.heterogeneity.distributions import DiscreteDistribution, aligned, mixture


class TestDiscreteDistribution:
    def test_merges_duplicates(self):
        p = DiscreteDistribution([1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
        assert np.array_equal(p.support[:, 0], [0.0, 1.0])
        assert np.allclose(p.mass, [0.5, 0.5])
        assert len(p) == 2 and p.dim == 1

    @pytest.mark.parametrize(
        "support, mass",
        [([0.0, 1.0], [0.5, 0.6]), ([0.0, 1.0], [1.5, -0.5]), ([0.0, 1.0], [1.0]), ([], [])],
    )
    def test_rejects_invalid(self, support, mass):
        with pytest.raises(InvalidArgumentError):
            DiscreteDistribution(support, mass)

    def test_from_points(self):
        p = DiscreteDistribution.from_points([[0.0, 1.0], [2.0, 2.0]], weights=[1.0, 3.0])
        queries = np.array([[2.0, 2.0], [0.0, 1.0], [5.0, 5.0]])
        assert np.allclose(p.mass_at(queries), [0.75, 0.25, 0])

    def test_from_labels_keeps_empty_classes(self):
        p = DiscreteDistribution.from_labels([0, 0, 2, 2], num_classes=4)
        assert np.array_equal(p.support[:, 0], [0.0, 1.0, 2.0, 3.0])
        assert np.allclose(p.mass, [0.5, 0.0, 0.5, 0.0])

    def test_from_labels_rejects_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            DiscreteDistribution.from_labels([0, 5], num_classes=3)


def test_aligned_union():
    p = DiscreteDistribution([0.0, 1.0], [0.5, 0.5])
    q = DiscreteDistribution([1.0, 2.0], [0.25, 0.75])
    union, p_mass, q_mass = aligned(p, q)
    assert np.array_equal(union[:, 0], [0.0, 1.0, 2.0])
    assert np.allclose(p_mass, [0.5, 0.5, 0.0])
    assert np.allclose(q_mass, [0.0, 0.25, 0.75])


def test_mixture_averages():
    average = mixture([DiscreteDistribution([0.0], [1.0]), DiscreteDistribution([1.0], [1.0])])
    assert np.allclose(average.mass, [0.5, 0.5])
    weighted = mixture(
        [DiscreteDistribution([0.0], [1.0]), DiscreteDistribution([1.0], [1.0])], [0.2, 0.8]
    )
    assert np.allclose(weighted.mass, [0.2, 0.8])
