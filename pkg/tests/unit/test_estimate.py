"""
Tests for coupling-independence estimation and the validity gate.
"""
import math

import numpy as np
import pytest

from spinlab.core.exceptions import DomainError
from spinlab.core.system import HammingWeight
from spinlab.coupling.estimate import (
    EMPIRICAL_LOWER_BOUND,
    PinningSpec,
    bernstein_halfwidth,
    coupling_cases,
    empirical_disagreement,
    estimate_ci,
    marginal_validity_test,
    per_vertex_check,
)
from spinlab.dynamics.rng import RandomStream
from spinlab.oracle.exact import enumerate_gibbs


def test_bernstein_halfwidth():
    assert bernstein_halfwidth(np.array([1.0]), 1.0, 0.05) == math.inf
    small = bernstein_halfwidth(np.array([0.0, 1.0] * 10), 1.0, 0.05)
    large = bernstein_halfwidth(np.array([0.0, 1.0] * 1000), 1.0, 0.05)
    assert 0.0 < large < small
    constant = bernstein_halfwidth(np.ones(10), 2.0, 0.05)
    assert constant == pytest.approx(7.0 * 2.0 * math.log(40.0) / 27.0)


def test_pinning_spec_validation():
    with pytest.raises(DomainError):
        PinningSpec("some")
    with pytest.raises(DomainError):
        PinningSpec("all", -1)


def test_enumerated_cases(hardcore_path3, stream):
    empty = coupling_cases(hardcore_path3, PinningSpec(), 10, stream)
    assert [(c.pinning, c.v, c.a, c.b) for c in empty] == [((), 0, 0, 1), ((), 1, 0, 1), ((), 2, 0, 1)]
    pinned = coupling_cases(hardcore_path3, PinningSpec("all", 1), 100, stream)
    assert len(pinned) > 3
    assert all(len(c.pinning) <= 1 for c in pinned)
    # an occupied middle vertex blocks both ends
    assert not any(c.pinning == ((1, 1),) for c in pinned)
    assert len(coupling_cases(hardcore_path3, PinningSpec("all", 1), 2, stream)) == 2


def test_random_cases(hardcore_cycle6):
    cases = coupling_cases(hardcore_cycle6, PinningSpec("random", 2), 5, RandomStream(2))
    assert len(cases) == 5
    assert all(len(c.pinning) <= 2 and c.v not in dict(c.pinning) for c in cases)


def test_estimate_ci(hardcore_path3):
    rho = HammingWeight.unit(3)
    estimate = estimate_ci(
        hardcore_path3, rho, "two-spin", PinningSpec(), 3, 200, RandomStream(5), target=100.0
    )
    assert estimate.label == EMPIRICAL_LOWER_BOUND
    assert len(estimate.cases) == 3
    assert estimate.value >= 1.0
    assert estimate.value == max(c.mean for c in estimate.cases)
    assert estimate.worst.mean == estimate.value
    assert estimate.meets_target
    assert estimate.dominates_transport
    assert all(c.wasserstein is not None and c.wasserstein >= 1.0 for c in estimate.cases)
    summary = estimate.to_dict()
    assert summary["label"] == EMPIRICAL_LOWER_BOUND
    assert len(summary["cases"]) == 3


def test_estimate_ci_is_reproducible(hardcore_path3):
    rho = HammingWeight.unit(3)
    first = estimate_ci(hardcore_path3, rho, "two-spin", PinningSpec(), 2, 50, RandomStream(6))
    second = estimate_ci(hardcore_path3, rho, "two-spin", PinningSpec(), 2, 50, RandomStream(6))
    assert first.value == second.value
    assert first.meets_target is None


def test_estimate_ci_guards(hardcore_path3, stream):
    with pytest.raises(DomainError):
        estimate_ci(hardcore_path3, HammingWeight.unit(2), "two-spin", PinningSpec(), 1, 10, stream)
    with pytest.raises(DomainError):
        estimate_ci(hardcore_path3, HammingWeight.unit(3), "two-spin", PinningSpec(), 0, 10, stream)


def test_marginal_validity_test(hardcore_cycle6, stream):
    mu = enumerate_gibbs(hardcore_cycle6)
    assert marginal_validity_test(mu.sample(stream, 3000), mu).passed
    stuck = np.zeros((3000, 6), dtype=np.int64)
    result = marginal_validity_test(stuck, mu)
    assert not result.passed
    assert result.p_value < 1e-4
    outside = np.ones((10, 6), dtype=np.int64)
    result = marginal_validity_test(outside, mu)
    assert result.outside_support == 10
    assert not result.to_dict()["passed"]
    with pytest.raises(DomainError):
        marginal_validity_test(np.zeros((0, 6)), mu)


def test_disagreement_and_per_vertex_check():
    xs = np.array([[0, 0], [0, 1]])
    ys = np.array([[0, 1], [0, 1]])
    freq, sigma = empirical_disagreement(xs, ys)
    assert freq.tolist() == [0.0, 0.5]
    assert sigma[1] == pytest.approx(math.sqrt(0.125))
    flagged = per_vertex_check(np.array([0.5, 0.1]), np.array([0.01, 0.01]), [0.3, 0.3], slack_sigmas=4.0)
    assert flagged == [0]
    assert per_vertex_check(freq, sigma, [1.0, 1.0]) == []
