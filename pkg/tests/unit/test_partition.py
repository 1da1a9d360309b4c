"""
Tests for partitions, their verifiers and the randomized construction.
"""
import pytest

from spinlab.core.exceptions import ConsistencyError, ConstructionError, DomainError
from spinlab.core.graph import Graph
from spinlab.dynamics.rng import RandomStream
from spinlab.partition.partition import (
    BALANCED,
    BIPARTITE_LEFT,
    GENERAL,
    Partition,
    bipartite_partition_parameters,
    construct_partition,
    lll_condition,
    lll_degree_threshold,
    partition_parameters,
    verify_balanced,
    verify_degree_partition,
    verify_left_partition,
)


def test_partition_structure():
    p = Partition.from_blocks([[0, 3], [1, 4], [2, 5]])
    assert p.k == 3
    assert p.block_of(4) == 1
    assert p.union([0, 2]) == frozenset({0, 2, 3, 5})
    assert p.sizes == (2, 2, 2)
    assert p.assignment_array(7).tolist() == [0, 1, 2, 0, 1, 2, -1]
    assert p.subset([2, 0]).blocks == (frozenset({2, 5}), frozenset({0, 3}))
    with pytest.raises(DomainError):
        p.block_of(6)


def test_partition_validation():
    with pytest.raises(ConsistencyError):
        Partition.from_blocks([[0, 1], [1, 2]])
    with pytest.raises(ConsistencyError):
        Partition.from_blocks([[0], [1]], cover=[0, 1, 2])
    with pytest.raises(DomainError):
        Partition.from_assignment([0, 2], k=2)
    empty_block = Partition.from_assignment([0, 0, 0], k=2)
    assert empty_block.sizes == (3, 0)


def test_partition_json_round_trip():
    p = Partition.from_blocks([[0, 3], [1, 4], []], cover=[0, 1, 3, 4])
    assert Partition.from_json(p.to_json()) == p


def test_degree_partition_verifier():
    graph = Graph.cycle(6)
    good = Partition.from_blocks([[0, 3], [1, 4], [2, 5]])
    check = verify_degree_partition(graph, good, 0.5)
    assert check.ok
    assert check.bound == pytest.approx(1.0)
    bad = Partition.from_blocks([[0, 2, 4], [1, 3, 5]])
    check = verify_degree_partition(graph, bad, 0.0)
    assert not check.ok
    assert check.worst_count == 2


def test_balance_and_left_verifiers():
    assert verify_balanced(Partition.from_blocks([[0, 3], [1, 4], [2, 5]]))
    assert not verify_balanced(Partition.from_blocks([[0, 1, 2, 3, 4], [5], []]))
    graph = Graph.complete_bipartite(2, 3)
    left = Partition.from_blocks([[0], [1]])
    assert verify_left_partition(graph, left, 1).ok
    assert not verify_left_partition(graph, Partition.from_blocks([[0, 1], []]), 1).ok
    with pytest.raises(ConsistencyError):
        verify_left_partition(graph, Partition.from_blocks([[0, 2], [1]]), 1)


def test_local_lemma_threshold():
    assert lll_degree_threshold(2, 1.0) == 14
    assert lll_condition(14, 2, 1.0)
    assert not lll_condition(13, 2, 1.0)
    assert not lll_condition(0, 2, 1.0)


def test_partition_parameters():
    params = partition_parameters(1, 1.0)
    assert params.k == 4
    assert params.xi == 1.0
    assert lll_condition(params.delta0, params.k, params.xi)
    assert not lll_condition(params.delta0 - 1, params.k, params.xi)
    assert partition_parameters(1, 0.5).k == 8
    assert bipartite_partition_parameters(3.0, 1) == 10
    assert bipartite_partition_parameters(7.5, 1) == 15
    with pytest.raises(DomainError):
        partition_parameters(0, 1.0)


def test_trivial_construction():
    p, stats = construct_partition(Graph.cycle(5), 1, 1.0, GENERAL, RandomStream(0))
    assert p.k == 1
    assert p.blocks[0] == frozenset(range(5))
    assert stats.successful_copy == 0


def test_trivial_left_partition_is_verified():
    """With one block, a right vertex sees all of its left neighbors at once."""
    graph = Graph.complete_bipartite(3, 1)
    with pytest.raises(ConstructionError) as excinfo:
        construct_partition(graph, 1, 1.0, BIPARTITE_LEFT, RandomStream(0), bound=1)
    assert excinfo.value.details["copies"] == 1
    p, _ = construct_partition(graph, 1, 1.0, BIPARTITE_LEFT, RandomStream(0), bound=3)
    assert verify_left_partition(graph, p, 3).ok


def test_construction_succeeds_when_every_round_passes():
    graph = Graph.cycle(12)
    p, stats = construct_partition(graph, 2, 1.0, GENERAL, RandomStream(5))
    assert verify_degree_partition(graph, p, 1.0).ok
    assert stats.rounds_per_copy == [1]
    assert stats.as_dict()["total_rounds"] == 1


def test_construction_is_reproducible():
    graph = Graph.cycle(12)
    first, _ = construct_partition(graph, 2, 1.0, BALANCED, RandomStream(9))
    second, _ = construct_partition(graph, 2, 1.0, BALANCED, RandomStream(9))
    assert first == second
    assert verify_balanced(first)


def test_bipartite_left_construction():
    graph = Graph.complete_bipartite(4, 2)
    p, _ = construct_partition(graph, 2, 1.0, BIPARTITE_LEFT, RandomStream(3))
    assert p.cover == graph.left
    assert verify_left_partition(graph, p, 2).ok


def test_construction_failure_reports_stats():
    with pytest.raises(ConstructionError) as excinfo:
        construct_partition(
            Graph.cycle(6), 3, 0.0, GENERAL, RandomStream(1), epsilon=1.0, max_round_time_factor=0.001
        )
    assert excinfo.value.details["copies"] == 1
    assert excinfo.value.details["total_rounds"] == excinfo.value.details["budget_per_copy"]
    assert excinfo.value.exit_code == 1


def test_construction_rejects_bad_arguments():
    with pytest.raises(DomainError):
        construct_partition(Graph.cycle(6), 2, 1.0, "round_robin", RandomStream(1))
    with pytest.raises(DomainError):
        construct_partition(Graph.cycle(6), 0, 1.0, GENERAL, RandomStream(1))
