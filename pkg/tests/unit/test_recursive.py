"""
Tests for maximal couplings and the recursive coupling kernels.
"""
import numpy as np
import pytest

from spinlab.core.exceptions import ConsistencyError, DomainError
from spinlab.core.graph import Graph
from spinlab.core.models import make_list_coloring
from spinlab.core.system import SPIN_MINUS, SPIN_PLUS, HammingWeight
from spinlab.coupling.estimate import coupling_validity
from spinlab.coupling.recursive import (
    CouplingSample,
    couple_given,
    get_coupler,
    is_list_coloring,
    maximal_coupling,
    maximal_coupling_plan,
    recursive_coupling,
    recursive_coupling_coloring,
    recursive_coupling_two_spin,
    sample_coupling,
)
from spinlab.dynamics.rng import RandomStream


def test_maximal_coupling_plan():
    p, q = np.array([0.5, 0.5]), np.array([0.2, 0.8])
    plan = maximal_coupling_plan(p, q)
    assert plan.sum(axis=1) == pytest.approx(p)
    assert plan.sum(axis=0) == pytest.approx(q)
    assert np.diag(plan) == pytest.approx(np.minimum(p, q))
    assert plan[1, 0] == 0.0
    with pytest.raises(DomainError):
        maximal_coupling_plan(p, np.ones(3) / 3)


def test_maximal_coupling_disagrees_with_tv_probability():
    p, q = np.array([0.5, 0.5]), np.array([0.2, 0.8])
    root = RandomStream(3)
    draws = [maximal_coupling(p, q, root.child(i)) for i in range(4000)]
    assert np.mean([a != b for a, b in draws]) == pytest.approx(0.3, abs=0.04)
    assert np.mean([a for a, _ in draws]) == pytest.approx(0.5, abs=0.04)


def test_couple_given():
    p, q = np.array([0.5, 0.5]), np.array([0.2, 0.8])
    assert couple_given(p, q, 0, 0.3) == 0
    assert couple_given(p, q, 0, 0.5) == 1
    assert couple_given(p, q, 1, 0.01) == 1
    with pytest.raises(ConsistencyError):
        couple_given(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 1, 0.5)


def test_two_spin_sample_is_consistent(hardcore_cycle6, stream):
    rho = HammingWeight((1, 2, 1, 2, 1, 2))
    sample = recursive_coupling_two_spin(hardcore_cycle6, {}, 0, stream, rho)
    assert sample.x[0] == SPIN_MINUS
    assert sample.y[0] == SPIN_PLUS
    assert 0 in sample.discrepancy
    sample.check(rho)
    with pytest.raises(ConsistencyError):
        CouplingSample(sample.x, sample.y, frozenset(), sample.cost).check(rho)


def test_equal_values_give_identical_copies(hardcore_cycle6, stream):
    sample = recursive_coupling(hardcore_cycle6, {}, 2, SPIN_MINUS, SPIN_MINUS, stream)
    assert sample.x == sample.y
    assert sample.cost == 0


def test_pinned_vertices_agree(hardcore_cycle6):
    pinning = {3: SPIN_MINUS}
    xs, ys = sample_coupling(get_coupler("two-spin"), hardcore_cycle6, pinning, 0, 0, 1, 50, RandomStream(4))
    assert np.all(xs[:, 3] == SPIN_MINUS)
    assert np.all(ys[:, 3] == SPIN_MINUS)
    assert np.all(ys[:, [1, 5]] == SPIN_MINUS)


def test_two_spin_coupling_has_exact_marginals(hardcore_cycle6):
    x_result, y_result = coupling_validity("two-spin", hardcore_cycle6, {}, 0, 0, 1, 400, RandomStream(9))
    assert x_result.passed
    assert y_result.passed


def test_antiferromagnet_coupling_with_pinning(antiferro_path4):
    x_result, y_result = coupling_validity(
        "two-spin", antiferro_path4, {3: SPIN_PLUS}, 1, 0, 1, 400, RandomStream(10)
    )
    assert x_result.passed
    assert y_result.passed


def test_coloring_coupling_has_exact_marginals(coloring_cycle4):
    assert is_list_coloring(coloring_cycle4)
    x_result, y_result = coupling_validity("coloring", coloring_cycle4, {}, 0, 0, 1, 400, RandomStream(12))
    assert x_result.passed
    assert y_result.passed
    sample = recursive_coupling_coloring(coloring_cycle4, {2: 2}, 0, 0, 1, RandomStream(13))
    assert sample.x[2] == sample.y[2] == 2


def test_swapped_coupling_is_rejected(hardcore_cycle6):
    x_result, y_result = coupling_validity("swapped", hardcore_cycle6, {}, 0, 0, 1, 100, RandomStream(14))
    assert not x_result.passed
    assert x_result.outside_support == 100
    assert not y_result.passed


def test_coupling_guards(hardcore_cycle6, coloring_cycle4, stream):
    with pytest.raises(ConsistencyError):
        recursive_coupling_coloring(hardcore_cycle6, {}, 0, 0, 1, stream)
    triangle = make_list_coloring(Graph.complete(3), [range(4)] * 3)
    with pytest.raises(ConsistencyError):
        recursive_coupling_coloring(triangle, {}, 0, 0, 1, stream)
    with pytest.raises(DomainError):
        recursive_coupling_two_spin(coloring_cycle4, {}, 0, stream)
    with pytest.raises(ConsistencyError):
        recursive_coupling(hardcore_cycle6, {0: 0}, 0, 0, 1, stream)
    with pytest.raises(DomainError):
        recursive_coupling(hardcore_cycle6, {}, 0, 0, 2, stream)
    with pytest.raises(DomainError):
        get_coupler("greedy")
    with pytest.raises(DomainError):
        sample_coupling(get_coupler("independent"), hardcore_cycle6, {}, 0, 0, 1, 0, stream)
