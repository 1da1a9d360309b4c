"""
Tests for the brute-force Gibbs oracle and exact distributions.
"""
import math

import numpy as np
import pytest

from spinlab.core.exceptions import DomainError, InfeasibleError, StateCapError
from spinlab.core.graph import Graph
from spinlab.core.models import make_hardcore, make_list_coloring, make_two_spin
from spinlab.core.system import condition
from spinlab.oracle.exact import (
    ExactDistribution,
    ExactOracle,
    divergence,
    enumerate_gibbs,
    exact_marginal,
    is_feasible,
    log_partition_function,
    partition_function,
    tv_estimation_bias,
    vertex_marginal,
)


def test_hardcore_path_partition_function(hardcore_path3):
    assert partition_function(hardcore_path3) == pytest.approx(5.0)
    dist = enumerate_gibbs(hardcore_path3)
    assert dist.size == 5
    assert dist.probability_of([1, 0, 1]) == pytest.approx(0.2)
    assert dist.probability_of([1, 1, 0]) == 0.0
    assert dist.support[0].tolist() == [0, 0, 0]


def test_small_partition_functions():
    assert partition_function(make_hardcore(Graph.complete(2), 1.0)) == pytest.approx(3.0)
    assert partition_function(make_two_spin(Graph.complete(2), 2.0, 2.0, 1.0)) == pytest.approx(6.0)
    colorings = make_list_coloring(Graph.cycle(4), [range(3)] * 4)
    assert partition_function(colorings) == pytest.approx(18.0)


def test_conditioned_partition_function_includes_pinned_factors():
    system = make_hardcore(Graph.path(3), 2.0)
    assert log_partition_function(condition(system, {0: 1})) == pytest.approx(math.log(6.0))


def test_marginals(hardcore_path3):
    assert vertex_marginal(hardcore_path3, 0).tolist() == pytest.approx([0.6, 0.4])
    assert vertex_marginal(hardcore_path3, 1).tolist() == pytest.approx([0.8, 0.2])
    pinned = condition(hardcore_path3, {1: 0})
    assert vertex_marginal(pinned, 1).tolist() == [1.0, 0.0]
    ends = exact_marginal(hardcore_path3, [0, 2]).as_dict()
    assert ends[(0, 0)] == pytest.approx(0.4)
    assert ends[(1, 1)] == pytest.approx(0.2)


def test_expectation_and_variance(hardcore_path3):
    dist = enumerate_gibbs(hardcore_path3)
    assert dist.expectation(lambda row: float(row.sum())) == pytest.approx(1.0)
    occupied = dist.support.sum(axis=1)
    assert dist.variance(occupied) == pytest.approx(0.4)
    with pytest.raises(DomainError):
        dist.expectation(np.ones(3))


def test_infeasible_system():
    system = make_list_coloring(Graph.path(2), [[0], [0]], q=2)
    assert not is_feasible(system)
    with pytest.raises(InfeasibleError):
        enumerate_gibbs(system)


def test_conflicting_pinning_is_infeasible(hardcore_path3):
    """Two adjacent occupied pins leave no feasible configuration."""
    conflicted = condition(hardcore_path3, {0: 1, 1: 1})
    assert not is_feasible(conflicted)
    with pytest.raises(InfeasibleError):
        enumerate_gibbs(conflicted)
    with pytest.raises(InfeasibleError):
        partition_function(conflicted)
    assert is_feasible(condition(hardcore_path3, {0: 1, 2: 1}))


def test_state_cap():
    with pytest.raises(StateCapError):
        ExactOracle(state_cap=4).enumerate(make_hardcore(Graph.path(3), 1.0))


def test_oracle_caches_by_fingerprint(hardcore_path3):
    oracle = ExactOracle()
    first = oracle.enumerate(hardcore_path3)
    assert oracle.enumerate(make_hardcore(Graph.path(3), 1.0)) is first
    oracle.clear()
    assert oracle.enumerate(hardcore_path3) is not first


def test_divergences(hardcore_path3):
    mu = enumerate_gibbs(hardcore_path3)
    point = ExactDistribution(mu.vertices, mu.support[:1], np.array([1.0]), 2)
    assert divergence("tv", mu, mu) == pytest.approx(0.0)
    assert divergence("tv", point, mu) == pytest.approx(0.8)
    assert divergence("chi2", point, mu) == pytest.approx(4.0)
    assert divergence("kl", point, mu) == pytest.approx(math.log(5.0))
    outside = ExactDistribution(mu.vertices, np.array([[1, 1, 1]]), np.array([1.0]), 2)
    assert divergence("tv", outside, mu) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        divergence("chi2", outside, mu)
    with pytest.raises(DomainError):
        divergence("hellinger", mu, mu)


def test_sampling_frequencies(hardcore_path3, stream):
    dist = enumerate_gibbs(hardcore_path3)
    draws = dist.sample(stream, 20000)
    empirical = ExactDistribution.from_samples(draws, dist.vertices, 2)
    assert empirical.size == 5
    for row, p in empirical.as_dict().items():
        assert abs(p - 0.2) < 0.02
    assert divergence("tv", empirical, dist) < 0.03


def test_validate_rejects_bad_distributions(hardcore_path3):
    mu = enumerate_gibbs(hardcore_path3)
    mu.validate()
    with pytest.raises(DomainError):
        ExactDistribution(mu.vertices, mu.support, mu.prob * 2, 2).validate()
    doubled = np.vstack([mu.support[:1], mu.support[:1]])
    with pytest.raises(DomainError):
        ExactDistribution(mu.vertices, doubled, np.array([0.5, 0.5]), 2).validate()


def test_csv_round_trip(hardcore_path3, tmp_path):
    mu = enumerate_gibbs(hardcore_path3)
    path = tmp_path / "mu.csv"
    mu.to_csv(path)
    assert path.read_text().splitlines()[0] == "state,prob"
    loaded = ExactDistribution.from_csv(path, mu.vertices, 2)
    assert np.array_equal(loaded.support, mu.support)
    assert np.allclose(loaded.prob, mu.prob, rtol=0, atol=1e-16)


def test_tv_estimation_bias():
    assert tv_estimation_bias(4, 100) == pytest.approx(0.1)
    with pytest.raises(DomainError):
        tv_estimation_bias(4, 0)
