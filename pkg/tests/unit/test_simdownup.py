"""
Tests for the recursive SimDownUp sampler and its schedule.
"""
import math

import numpy as np
import pytest

from spinlab.core.exceptions import ConsistencyError, DomainError
from spinlab.core.graph import Graph
from spinlab.core.models import make_hardcore
from spinlab.dynamics.chains import SimDownUpSampler
from spinlab.dynamics.rng import RandomStream
from spinlab.dynamics.simdownup import (
    SimDownUpParams,
    UpdateSchedule,
    set_simdownup_schedule,
    sim_down_up,
    sim_down_up_batch,
    sim_down_up_matrix,
)
from spinlab.dynamics.state import ChainState
from spinlab.oracle.exact import ExactDistribution, divergence
from spinlab.partition.partition import Partition


@pytest.fixture
def path4():
    return make_hardcore(Graph.path(4), 1.0)


@pytest.fixture
def two_blocks():
    return Partition.from_blocks([[0, 2], [1, 3]])


@pytest.fixture
def small_params():
    return SimDownUpParams(T0=2, T1=2, base_level=1, M=1, eta=1.0, k=2)


def test_schedule_constants():
    params = set_simdownup_schedule(3, 10, 0.1, 1, 1.0, c=4.0)
    assert params.k == 4
    assert params.T1 == 19
    assert params.T0 == 57
    assert params.base_level == 2
    assert params.glauber_steps == 57 * 19 ** 2


def test_base_budget_scales_with_the_mixing_time():
    single = set_simdownup_schedule(3, 10, 0.1, 1, 1.0, c=4.0)
    double = set_simdownup_schedule(6, 10, 0.1, 1, 1.0, c=4.0)
    assert double.T0 == 2 * single.T0
    assert double.T1 == single.T1
    assert single.T0 >= math.ceil(3 * 4.0 * math.log(100.0))


def test_schedule_short_logarithm_is_clamped():
    params = set_simdownup_schedule(1, 2, 1.0, 1, 1.0, c=1.0, k=2)
    assert params.T1 == 1
    assert params.T0 == 1
    assert params.base_level == 0


def test_schedule_rejects_bad_inputs():
    with pytest.raises(DomainError):
        set_simdownup_schedule(0, 10, 0.1, 1, 1.0)
    with pytest.raises(DomainError):
        set_simdownup_schedule(1, 10, 0.0, 1, 1.0)
    with pytest.raises(DomainError):
        set_simdownup_schedule(1, 10, 0.1, 2, 1.0, k=3)
    with pytest.raises(DomainError):
        SimDownUpParams(T0=0, T1=1, base_level=0, M=1, eta=1.0, k=2)
    with pytest.raises(DomainError):
        SimDownUpParams(T0=1, T1=1, base_level=2, M=1, eta=1.0, k=2)


def test_matrix_is_a_reversible_kernel(path4, two_blocks, small_params):
    matrix = sim_down_up_matrix(path4, two_blocks, small_params)
    assert matrix.row_sum_violation() <= 1e-12
    assert matrix.stationarity_violation() <= 1e-12
    assert matrix.detailed_balance_violation() <= 1e-12


def test_batch_follows_the_matrix_row(path4, two_blocks, small_params):
    matrix = sim_down_up_matrix(path4, two_blocks, small_params)
    sampler = SimDownUpSampler(path4, two_blocks, small_params)
    configs = np.zeros((4000, 4), dtype=np.int64)
    sampler.run_batch(configs, 1, RandomStream(21))
    row = matrix.P[0]
    live = row > 0
    expected = ExactDistribution(matrix.stationary.vertices, matrix.states[live], row[live], 2)
    empirical = ExactDistribution.from_samples(configs, expected.vertices, 2)
    assert divergence("tv", empirical, expected) < 0.06


def test_batch_and_single_replica_agree(path4, two_blocks, small_params):
    stream = RandomStream(5)
    configs = np.zeros((1, 4), dtype=np.int64)
    sim_down_up_batch(path4, two_blocks, configs, (), small_params, stream)
    result, _ = sim_down_up(path4, two_blocks, ChainState((0, 0, 0, 0)), (), small_params, stream)
    assert tuple(configs[0]) == tuple(result[v] for v in range(4))


def test_recorded_schedule(path4, two_blocks, small_params):
    result, schedule = sim_down_up(
        path4, two_blocks, ChainState((0, 0, 0, 0)), (), small_params, RandomStream(2), record=True
    )
    assert sorted(result) == [0, 1, 2, 3]
    assert len(schedule) == small_params.T0 * small_params.T1
    base, schedule = sim_down_up(
        path4, two_blocks, ChainState((0, 0, 0, 0)), (0,), small_params, RandomStream(2), record=True
    )
    assert sorted(base) == [1, 3]
    assert len(schedule) == small_params.T0
    assert set(schedule.vertices) <= {1, 3}


def test_level_and_partition_checks(path4, two_blocks, small_params):
    state = ChainState((0, 0, 0, 0))
    with pytest.raises(DomainError):
        sim_down_up(path4, two_blocks, state, (5,), small_params, RandomStream(0))
    with pytest.raises(DomainError):
        sim_down_up(path4, two_blocks, state, (0, 1), small_params, RandomStream(0))
    three = Partition.from_blocks([[0], [1, 3], [2]])
    with pytest.raises(ConsistencyError):
        sim_down_up(path4, three, state, (), small_params, RandomStream(0))


def test_update_schedule_censoring():
    schedule = UpdateSchedule()
    for t, v in enumerate([0, 1, 2]):
        schedule.append(v, (t,))
    censored = schedule.censor([False, True, False])
    assert censored.uncensored() == [0, 2]
    assert schedule.uncensored() == [0, 1, 2]
    assert censored.censor([True, False, False]).uncensored() == [2]
    assert censored.to_dict()["censored"] == [False, True, False]
    with pytest.raises(ConsistencyError):
        schedule.censor([True])
    with pytest.raises(ConsistencyError):
        UpdateSchedule([(0, (0,))], [True, False])
