"""
Tests for splittable random streams and chain state serialization.
"""
import numpy as np
import pytest

from spinlab.core.exceptions import ConsistencyError
from spinlab.core.graph import Graph
from spinlab.core.models import make_hardcore
from spinlab.core.system import condition
from spinlab.dynamics.rng import RandomStream
from spinlab.dynamics.state import ChainState


def test_streams_are_reproducible():
    a = RandomStream(7, (1, 2)).random(5)
    b = RandomStream(7, (1, 2)).random(5)
    assert np.array_equal(a, b)


def test_children_are_path_addressed():
    root = RandomStream(7)
    assert root.child(1, 2).path == (1, 2)
    assert np.array_equal(root.child(1, 2).random(4), root.child(1).child(2).random(4))
    assert not np.array_equal(root.child(1).random(4), root.child(2).random(4))
    assert not np.array_equal(root.random(4), RandomStream(8).random(4))
    assert [s.path for s in root.spawn(3)] == [(0,), (1,), (2,)]


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)


def test_chain_state_round_trip():
    state = ChainState((0, 1, 1), step_count=4, seed=3, path=(2,))
    restored = ChainState.from_dict(state.to_dict(2), 2)
    assert restored == state
    assert state.to_dict(2)["config"] == "-++"
    assert state.advance([1, 0, 0], 2).step_count == 6


def test_chain_state_checks_pinning():
    system = condition(make_hardcore(Graph.path(3), 1.0), {1: 0})
    assert ChainState.initial(system, [1, 0, 1]).config == (1, 0, 1)
    with pytest.raises(ConsistencyError):
        ChainState.initial(system, [0, 1, 0])
    with pytest.raises(ConsistencyError):
        ChainState.initial(system, [0, 0])
