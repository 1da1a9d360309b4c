"""
Tests for the down-up walks over a partition and their exact analysis.
"""
import numpy as np
import pytest

from spinlab.core.exceptions import DomainError
from spinlab.core.graph import Graph
from spinlab.core.models import make_hardcore
from spinlab.dynamics.chains import DownUpChain
from spinlab.dynamics.downup import (
    comparison_bound,
    down_up_matrix,
    down_up_step,
    feasible_start,
    level_relaxation_times,
    local_to_global_bound,
    path_coupling_contraction,
)
from spinlab.dynamics.rng import RandomStream
from spinlab.dynamics.state import ChainState
from spinlab.oracle.exact import ExactDistribution, divergence
from spinlab.oracle.matrices import RESAMPLE_BLOCK, RESAMPLE_COMPLEMENT, relaxation_time
from spinlab.partition.partition import Partition


@pytest.fixture
def three_blocks():
    return Partition.from_blocks([[0, 3], [1, 4], [2, 5]])


@pytest.mark.parametrize("mode", [RESAMPLE_COMPLEMENT, RESAMPLE_BLOCK])
@pytest.mark.parametrize("ell", [1, 2])
def test_down_up_matrix_is_reversible_and_psd(hardcore_cycle6, three_blocks, mode, ell):
    matrix = down_up_matrix(hardcore_cycle6, three_blocks, ell, mode=mode)
    assert matrix.row_sum_violation() <= 1e-12
    assert matrix.detailed_balance_violation() <= 1e-12
    assert matrix.eigenvalues().min() >= -1e-10


def test_keeping_nothing_resamples_everything(hardcore_cycle6, three_blocks):
    matrix = down_up_matrix(hardcore_cycle6, three_blocks, 0)
    assert np.allclose(matrix.P, np.tile(matrix.stationary.prob, (matrix.size, 1)))
    assert relaxation_time(matrix) == pytest.approx(1.0)


def test_ell_out_of_range(hardcore_cycle6, three_blocks):
    with pytest.raises(DomainError):
        down_up_matrix(hardcore_cycle6, three_blocks, 4)
    with pytest.raises(DomainError):
        down_up_step(hardcore_cycle6, three_blocks, 4, ChainState((0,) * 6), RandomStream(0))


def test_step_follows_the_matrix_row(hardcore_cycle6, three_blocks):
    matrix = down_up_matrix(hardcore_cycle6, three_blocks, 1)
    start = feasible_start(hardcore_cycle6)
    assert start.tolist() == [0] * 6
    chain = DownUpChain(hardcore_cycle6, three_blocks, 1)
    configs = np.tile(start, (3000, 1))
    chain.run_batch(configs, 1, RandomStream(11))
    row = matrix.P[0]
    live = row > 0
    expected = ExactDistribution(matrix.stationary.vertices, matrix.states[live], row[live], 2)
    empirical = ExactDistribution.from_samples(configs, expected.vertices, 2)
    assert divergence("tv", empirical, expected) < 0.08


@pytest.fixture
def hardcore_path6():
    return make_hardcore(Graph.path(6), 1.0)


def test_local_to_global_bound_holds(hardcore_path6, three_blocks):
    gammas = level_relaxation_times(hardcore_path6, three_blocks, 2)
    assert len(gammas) == 2
    assert all(g >= 1.0 - 1e-9 for g in gammas)
    report = local_to_global_bound(hardcore_path6, three_blocks, 2)
    assert report.holds
    assert report.bound == pytest.approx(gammas[0] * gammas[1])


def test_comparison_bound_holds(hardcore_path6, three_blocks):
    report = comparison_bound(hardcore_path6, three_blocks, 1, 0.5)
    assert report.eta == pytest.approx(1.0)
    assert report.holds
    with pytest.raises(DomainError):
        comparison_bound(hardcore_path6, three_blocks, 3, 0.5)


def test_path_coupling_contraction_is_finite():
    system = make_hardcore(Graph.path(4), 0.5)
    p = Partition.from_blocks([[0, 2], [1, 3]])
    value = path_coupling_contraction(system, p, 0)
    assert 0.0 <= value < float("inf")
    with pytest.raises(DomainError):
        path_coupling_contraction(system, p, 2)
