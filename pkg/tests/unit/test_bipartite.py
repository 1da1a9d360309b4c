"""
Tests for the bipartite block dynamics and the chain factory.
"""
import numpy as np
import pytest

from spinlab.core.exceptions import ConfigurationError, ConsistencyError, DomainError
from spinlab.core.graph import Graph
from spinlab.core.models import make_bipartite_hardcore, make_hardcore
from spinlab.dynamics.bipartite import (
    bipartite_block_matrix,
    bipartite_block_step,
    chi2_projection_contraction,
)
from spinlab.dynamics.chains import (
    BipartiteBlockChain,
    DownUpChain,
    GlauberChain,
    SimDownUpSampler,
    build_chain,
)
from spinlab.dynamics.rng import RandomStream
from spinlab.dynamics.simdownup import SimDownUpParams
from spinlab.dynamics.state import ChainState
from spinlab.oracle.exact import ExactDistribution, divergence
from spinlab.partition.partition import Partition


@pytest.fixture
def k32():
    return make_bipartite_hardcore(Graph.complete_bipartite(3, 2), 1.0)


@pytest.fixture
def singletons():
    return Partition.from_blocks([[0], [1], [2]])


def test_block_matrix_is_reversible(k32, singletons):
    matrix = bipartite_block_matrix(k32, singletons, 1)
    assert matrix.size == 11
    assert matrix.row_sum_violation() <= 1e-12
    assert matrix.stationarity_violation() <= 1e-12
    assert matrix.detailed_balance_violation() <= 1e-12


def test_step_follows_the_matrix_row(k32, singletons):
    matrix = bipartite_block_matrix(k32, singletons, 1)
    chain = BipartiteBlockChain(k32, singletons, 1)
    configs = np.zeros((3000, 5), dtype=np.int64)
    chain.run_batch(configs, 1, RandomStream(17))
    row = matrix.P[0]
    live = row > 0
    expected = ExactDistribution(matrix.stationary.vertices, matrix.states[live], row[live], 2)
    empirical = ExactDistribution.from_samples(configs, expected.vertices, 2)
    assert divergence("tv", empirical, expected) < 0.08


def test_step_keeps_an_independent_set(k32, singletons):
    state = ChainState((0, 0, 0, 0, 0))
    stream = RandomStream(3)
    for _ in range(50):
        state = bipartite_block_step(k32, singletons, 1, state, stream)
        left_on = any(state.config[v] for v in (0, 1, 2))
        right_on = any(state.config[v] for v in (3, 4))
        assert not (left_on and right_on)
    assert state.step_count == 50


def test_left_partition_checks(k32, singletons):
    with pytest.raises(DomainError):
        bipartite_block_matrix(k32, singletons, 2)
    with pytest.raises(ConsistencyError):
        bipartite_block_matrix(k32, Partition.from_blocks([[0, 3], [1], [2]]), 1)
    odd = make_hardcore(Graph.cycle(5), 1.0)
    with pytest.raises(ConsistencyError):
        bipartite_block_matrix(odd, Partition.from_blocks([[0], [1], [2, 3, 4]]), 1)


def test_projection_contraction_holds(k32, singletons):
    report = chi2_projection_contraction(k32, singletons, 1, 20, RandomStream(4))
    assert report.trials == 20
    assert 0.0 <= report.block_coefficient <= 1.0 + 1e-10
    assert report.holds


def test_build_chain(hardcore_path3):
    p = Partition.from_blocks([[0, 2], [1]])
    assert isinstance(build_chain("glauber", hardcore_path3), GlauberChain)
    assert isinstance(build_chain("downup", hardcore_path3, p, ell=1), DownUpChain)
    params = SimDownUpParams(T0=1, T1=1, base_level=0, M=1, eta=1.0, k=2)
    assert isinstance(build_chain("simdownup", hardcore_path3, p, params=params), SimDownUpSampler)
    with pytest.raises(ConfigurationError):
        build_chain("downup", hardcore_path3)
    with pytest.raises(ConfigurationError):
        build_chain("downup", hardcore_path3, p)
    with pytest.raises(ConfigurationError):
        build_chain("simdownup", hardcore_path3, p)
    with pytest.raises(ConfigurationError):
        build_chain("metropolis", hardcore_path3, p)


def test_default_run_batch_uses_replica_streams(hardcore_path3):
    chain = DownUpChain(hardcore_path3, Partition.from_blocks([[0, 2], [1]]), 1)
    first = chain.run_batch(np.zeros((5, 3), dtype=np.int64), 3, RandomStream(8))
    second = chain.run_batch(np.zeros((5, 3), dtype=np.int64), 3, RandomStream(8))
    assert np.array_equal(first, second)
