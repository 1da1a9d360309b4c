"""
Tests for self-avoiding-walk trees and tree influences.
"""
import numpy as np
import pytest

from spinlab.core.exceptions import ConsistencyError, DepthCapError, DomainError
from spinlab.core.graph import Graph
from spinlab.core.models import make_hardcore, make_two_spin
from spinlab.core.system import SPIN_MINUS, SPIN_PLUS, condition
from spinlab.coupling.saw import (
    build_saw_tree,
    check_saw_tree,
    coupling_influence_bound,
    saw_root_marginal,
    tree_influence,
)
from spinlab.oracle.exact import vertex_marginal


def test_triangle_tree_shape():
    system = make_hardcore(Graph.complete(3), 1.0)
    tree = build_saw_tree(system, 0)
    assert len(tree) == 7
    assert [tree.nodes[i].origin for i in range(7)] == [0, 1, 2, 0, 2, 1, 0]
    assert tree.nodes[3].forced_spin == SPIN_PLUS
    assert tree.nodes[6].forced_spin == SPIN_MINUS
    assert tree.forced_leaves == [3, 6]
    assert tree.path_to(3) == [0, 1, 2, 3]
    assert tree.copies_of(0) == [0, 3, 6]
    assert [len(level) for level in tree.levels()] == [1, 2, 2, 2]
    assert "shape=box" in tree.to_dot()
    check_saw_tree(tree, system.graph)


def test_triangle_root_marginal():
    system = make_hardcore(Graph.complete(3), 1.0)
    assert saw_root_marginal(build_saw_tree(system, 0)) == pytest.approx([0.75, 0.25])


@pytest.mark.parametrize(
    "system",
    [
        make_hardcore(Graph.cycle(5), 1.0),
        make_hardcore(Graph.star(3), 2.0),
        make_two_spin(Graph.cycle(4), 0.5, 0.5, 1.0),
        make_two_spin(Graph.complete(4), 2.0, 0.5, 0.7),
    ],
)
def test_root_marginals_match_enumeration(system):
    for pinning in ({}, {1: SPIN_PLUS}, {2: SPIN_MINUS}):
        conditioned = condition(system, pinning)
        for r in conditioned.free_vertices:
            tree = build_saw_tree(conditioned, r)
            check_saw_tree(tree, system.graph)
            assert np.allclose(saw_root_marginal(tree), vertex_marginal(conditioned, r), atol=1e-10)


def test_build_guards(coloring_cycle4, hardcore_cycle6):
    with pytest.raises(DomainError):
        build_saw_tree(coloring_cycle4, 0)
    with pytest.raises(DomainError):
        build_saw_tree(hardcore_cycle6, 6)
    with pytest.raises(ConsistencyError):
        build_saw_tree(condition(hardcore_cycle6, {0: 0}), 0)
    with pytest.raises(DepthCapError):
        build_saw_tree(hardcore_cycle6, 0, depth_cap=1)


def test_pinned_neighbors_become_forced_leaves(hardcore_cycle6):
    tree = build_saw_tree(condition(hardcore_cycle6, {1: SPIN_MINUS}), 0)
    pinned_copies = tree.copies_of(1)
    assert pinned_copies
    assert all(tree.nodes[i].forced_spin == SPIN_MINUS for i in pinned_copies)


def test_edge_influence_on_a_path():
    system = make_hardcore(Graph.path(2), 1.0)
    tree = build_saw_tree(system, 0)
    influence = tree_influence(tree)
    assert influence.edge_values[1] == pytest.approx(-0.5)
    assert influence.values.tolist() == pytest.approx([0.0, 0.5])
    assert influence.level_sums == pytest.approx([0.0, 0.5])
    assert influence.copy_sum(tree, 1) == pytest.approx(0.5)


def test_coupling_influence_bound_counts_the_root():
    system = make_hardcore(Graph.path(3), 1.0)
    bound = coupling_influence_bound(system, {}, 0)
    assert bound[0] == 1.0
    assert bound[1] == pytest.approx(1 / 3)
    assert 0.0 < bound[2] < bound[1]
    forced = coupling_influence_bound(system, {2: SPIN_PLUS}, 0)
    assert forced[2] == 0.0
