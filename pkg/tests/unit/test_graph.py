"""
Tests for graphs, generators and the edge-list file format.
"""
import pytest

from spinlab.core.exceptions import ConsistencyError, DomainError
from spinlab.core.graph import Graph, is_triangle_free, parse_graph_spec, read_graph_file, write_graph_file


def test_generators():
    path = Graph.path(4)
    assert path.edges == ((0, 1), (1, 2), (2, 3))
    assert path.max_degree == 2

    star = Graph.star(3)
    assert star.vertex_count == 4
    assert star.degree(0) == 3

    kbip = Graph.complete_bipartite(2, 3)
    assert kbip.edge_count == 6
    assert kbip.left == frozenset({0, 1})
    assert kbip.right == frozenset({2, 3, 4})

    assert Graph.complete(4).edge_count == 6


def test_cycle_needs_three_vertices():
    with pytest.raises(DomainError):
        Graph.cycle(2)


def test_invalid_edges_rejected():
    with pytest.raises(ConsistencyError):
        Graph.from_edges(2, [(0, 0)])
    with pytest.raises(ConsistencyError):
        Graph.from_edges(2, [(0, 1), (1, 0)])
    with pytest.raises(ConsistencyError):
        Graph.from_edges(2, [(0, 2)])


def test_bipartition_must_separate_edges():
    with pytest.raises(ConsistencyError):
        Graph.from_edges(2, [(0, 1)], ([0, 1], []))
    with pytest.raises(ConsistencyError):
        Graph.path(3).left


def test_vertex_order():
    graph = Graph.from_edges(3, [(0, 1), (1, 2)], vertex_order=[2, 0, 1])
    assert graph.rank == (1, 2, 0)
    assert graph.precedes(2, 0)
    assert graph.ordered_neighbors(1) == [2, 0]
    with pytest.raises(ConsistencyError):
        Graph.from_edges(3, [], vertex_order=[0, 0, 1])


def test_degree_queries():
    graph = Graph.path(4)
    assert graph.induced_max_degree([0, 1, 2]) == 2
    assert graph.induced_max_degree([0, 2]) == 0
    assert Graph.path(3).padded_neighbors().tolist() == [[1, -1], [0, 2], [1, -1]]


def test_random_regular_degrees():
    graph = Graph.random_regular(10, 3, seed=1)
    assert all(graph.degree(v) == 3 for v in range(10))
    with pytest.raises(DomainError):
        Graph.random_regular(5, 3, seed=1)


def test_random_bipartite_respects_left_degree():
    graph = Graph.random_bipartite(12, 4, 6, seed=3)
    assert graph.left == frozenset(range(12))
    assert all(graph.degree(v) <= 4 for v in graph.left)


def test_triangle_free():
    assert is_triangle_free(Graph.cycle(4))
    assert not is_triangle_free(Graph.complete(3))


def test_graph_file_round_trip(tmp_path):
    graph = Graph.complete_bipartite(2, 2)
    path = tmp_path / "k22.txt"
    write_graph_file(graph, path)
    assert path.read_text().splitlines()[0] == "4 4 bipartite 2 2"
    loaded = read_graph_file(path)
    assert loaded.edges == graph.edges
    assert loaded.left == graph.left


def test_graph_file_edge_count_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 2\n0 1\n")
    with pytest.raises(ConsistencyError):
        read_graph_file(path)


def test_parse_graph_spec():
    assert parse_graph_spec("cycle:5").edge_count == 5
    assert parse_graph_spec("kbip:2:3").left == frozenset({0, 1})
    with pytest.raises(DomainError):
        parse_graph_spec("wheel:5")
    with pytest.raises(DomainError):
        parse_graph_spec("cycle:five")
    with pytest.raises(DomainError):
        parse_graph_spec("kbip:2")
