"""
Self-avoiding-walk trees of two-spin systems.

The tree rooted at ``r`` has one node per self-avoiding walk from ``r``.  A
walk stops when it reaches a pinned vertex (the copy keeps the pinned value)
or when it closes a cycle ``v_0 .. v_l`` with ``v_l = v_i``: the closing copy
is fixed to ``-`` if ``v_{i+1}`` comes after ``v_{l-1}`` in the graph's vertex
order and to ``+`` otherwise.  Node ids follow depth-first preorder, so every
parent id is smaller than its children's.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import networkx as nx
import numpy as np

from ..core.exceptions import ConsistencyError, DepthCapError, DomainError, InfeasibleError
from ..core.graph import Graph
from ..core.system import SPIN_MINUS, SPIN_PLUS, PartialConfig, SpinSystem, condition
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class SAWNode:
    origin: int
    parent: Optional[int]
    depth: int
    children: List[int] = field(default_factory=list)
    forced_spin: Optional[int] = None

    @property
    def is_free(self) -> bool:
        return self.forced_spin is None


@dataclass
class SAWTree:
    """Rooted SAW tree together with the two-spin system it carries."""

    nodes: List[SAWNode]
    source_pinning: PartialConfig
    system: SpinSystem
    root: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def copies_of(self, u: int) -> List[int]:
        return [i for i, node in enumerate(self.nodes) if node.origin == u]

    def levels(self) -> List[List[int]]:
        out: List[List[int]] = []
        for i, node in enumerate(self.nodes):
            while len(out) <= node.depth:
                out.append([])
            out[node.depth].append(i)
        return out

    @property
    def forced_leaves(self) -> List[int]:
        return [i for i, node in enumerate(self.nodes) if not node.is_free]

    def path_to(self, node_id: int) -> List[int]:
        """Node ids from the root down to ``node_id``."""
        path = [node_id]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return path[::-1]

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        for i, node in enumerate(self.nodes):
            g.add_node(i, origin=node.origin, forced=node.forced_spin)
            if node.parent is not None:
                g.add_edge(node.parent, i)
        return g

    def to_dot(self) -> str:
        """Graphviz text; forced copies are drawn as boxes labelled with their spin."""
        g = self.to_networkx()
        lines = ["digraph saw {"]
        for i, data in g.nodes(data=True):
            if data["forced"] is None:
                lines.append(f'  {i} [label="{data["origin"]}"];')
            else:
                sign = "+" if data["forced"] == SPIN_PLUS else "-"
                lines.append(f'  {i} [label="{data["origin"]}{sign}", shape=box];')
        for u, v in g.edges():
            lines.append(f"  {u} -> {v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _closing_spin(graph: Graph, after_repeat: int, before_close: int) -> int:
    return SPIN_MINUS if graph.precedes(before_close, after_repeat) else SPIN_PLUS


def _tree_system(system: SpinSystem, nodes: List[SAWNode]) -> SpinSystem:
    edges = [(node.parent, i) for i, node in enumerate(nodes) if node.parent is not None]
    tree_graph = Graph.from_edges(len(nodes), edges)
    fields = np.array([system.base_field[node.origin] for node in nodes])
    interaction = {
        (p, c): system.interaction_between(nodes[p].origin, nodes[c].origin) for p, c in edges
    }
    domains = [system.domain[node.origin] for node in nodes]
    pinning = {i: node.forced_spin for i, node in enumerate(nodes) if not node.is_free}
    if not edges:
        interaction = np.ones((system.q, system.q))
    return SpinSystem.create(
        tree_graph, system.q, fields, interaction, domain=domains, pinning=pinning, model=system.model
    )


def build_saw_tree(system: SpinSystem, root: int, depth_cap: Optional[int] = None) -> SAWTree:
    """SAW tree of ``system`` (with its pinning) rooted at the free vertex ``root``."""
    if system.q != 2:
        raise DomainError("SAW trees are built for two-spin systems", {"q": system.q})
    if not 0 <= root < system.n:
        raise DomainError("root out of range", {"root": root})
    if system.is_pinned(root):
        raise ConsistencyError("the root of a SAW tree must be free", {"root": root})
    config = get_config()
    depth_cap = depth_cap if depth_cap is not None else config.get_int("coupling.depth_cap", 64)
    node_cap = config.get_int("coupling.saw_node_cap", 200000)
    graph = system.graph

    nodes = [SAWNode(root, None, 0)]
    # (node id, walk from the root as a vertex list)
    stack: List[Tuple[int, List[int]]] = [(0, [root])]
    while stack:
        node_id, walk = stack.pop()
        w = walk[-1]
        position = {v: i for i, v in enumerate(walk)}
        previous = walk[-2] if len(walk) > 1 else None
        pending = []
        for u in graph.neighbors(w):
            if u == previous:
                continue
            child = SAWNode(u, node_id, len(walk))
            if u in position:
                child.forced_spin = _closing_spin(graph, walk[position[u] + 1], w)
            elif system.is_pinned(u):
                child.forced_spin = system.presented_spin(u, w)
            elif len(walk) > depth_cap:
                raise DepthCapError("SAW tree deeper than the cap", {"depth_cap": depth_cap, "root": root})
            nodes.append(child)
            if len(nodes) > node_cap:
                raise DepthCapError("SAW tree larger than the node cap", {"node_cap": node_cap})
            child_id = len(nodes) - 1
            nodes[node_id].children.append(child_id)
            if child.is_free:
                pending.append((child_id, walk + [u]))
        stack.extend(reversed(pending))

    # Renumber to depth-first preorder.
    order: List[int] = []
    visit = [0]
    while visit:
        i = visit.pop()
        order.append(i)
        visit.extend(reversed(nodes[i].children))
    new_id = {old: new for new, old in enumerate(order)}
    renumbered = []
    for old in order:
        node = nodes[old]
        renumbered.append(
            SAWNode(
                node.origin,
                None if node.parent is None else new_id[node.parent],
                node.depth,
                [new_id[c] for c in node.children],
                node.forced_spin,
            )
        )
    tree = SAWTree(renumbered, system.pinning, _tree_system(system, renumbered))
    logger.debug(f"SAW tree at {root}: {len(tree)} nodes, {len(tree.forced_leaves)} forced")
    return tree


def check_saw_tree(tree: SAWTree, graph: Graph) -> None:
    """Raise if the tree breaks the walk, leaf or degree invariants."""
    for i, node in enumerate(tree.nodes):
        origins = [tree.nodes[j].origin for j in tree.path_to(i)]
        if len(set(origins[:-1])) != len(origins) - 1:
            raise ConsistencyError("root path is not self-avoiding", {"node": i})
        if not node.is_free and node.children:
            raise ConsistencyError("forced copy with children", {"node": i})
        if node.is_free and len(origins) != len(set(origins)):
            raise ConsistencyError("free copy closes a cycle", {"node": i})
        if node.is_free:
            degree = len(node.children) + (node.parent is not None)
            if degree != graph.degree(node.origin):
                raise ConsistencyError("free copy degree differs from the graph", {"node": i})


def _subtree_weights(tree: SAWTree) -> np.ndarray:
    """``Z[i, b]``: weight of node ``i``'s subtree with ``i`` taking spin ``b``, each row normalized."""
    system = tree.system
    unary = np.array(system.base_field, dtype=float) * system.domain_mask
    Z = np.zeros((len(tree), system.q))
    for i in range(len(tree) - 1, -1, -1):
        node = tree.nodes[i]
        if not node.is_free:
            Z[i, node.forced_spin] = 1.0
            continue
        row = unary[i].copy()
        for c in node.children:
            row *= system.interaction_between(i, c) @ Z[c]
        total = row.sum()
        if total <= 0:
            raise InfeasibleError("SAW subtree has zero weight", {"node": i, "origin": node.origin})
        Z[i] = row / total
    return Z


def saw_root_marginal(tree: SAWTree) -> np.ndarray:
    """Root marginal of the tree distribution by leaf-to-root recursion."""
    return _subtree_weights(tree)[tree.root]


@dataclass
class TreeInfluence:
    values: np.ndarray
    level_sums: List[float]
    edge_values: Dict[int, float]

    def copy_sum(self, tree: SAWTree, u: int) -> float:
        return float(sum(self.values[i] for i in tree.copies_of(u)))


def tree_influence(tree: SAWTree) -> TreeInfluence:
    """``|Psi(root, node)|`` for every node, as products of edge influences.

    The edge influence ``Psi(p, c) = P(c=+ | p=+) - P(c=+ | p=-)`` depends on
    ``c``'s subtree only.  Forced copies and edges below an impossible parent
    spin get zero.
    """
    system = tree.system
    Z = _subtree_weights(tree)
    signed = np.zeros(len(tree))
    # A root with a deterministic spin has no influence.
    signed[tree.root] = 1.0 if np.all(Z[tree.root] > 0) else 0.0
    edge_values: Dict[int, float] = {}
    for i in range(1, len(tree)):
        node = tree.nodes[i]
        p = node.parent
        psi = 0.0
        if node.is_free:
            A = system.interaction_between(p, i)
            plus_row = A[SPIN_PLUS] * Z[i]
            minus_row = A[SPIN_MINUS] * Z[i]
            if plus_row.sum() > 0 and minus_row.sum() > 0:
                psi = plus_row[SPIN_PLUS] / plus_row.sum() - minus_row[SPIN_PLUS] / minus_row.sum()
        edge_values[i] = float(psi)
        signed[i] = signed[p] * psi
    values = np.abs(signed)
    values[tree.root] = 0.0
    level_sums = [float(values[level].sum()) for level in tree.levels()]
    return TreeInfluence(values, level_sums, edge_values)


def coupling_influence_bound(
    system: SpinSystem,
    pinning: Mapping[int, int],
    v: int,
    depth_cap: Optional[int] = None,
) -> Dict[int, float]:
    """Per-vertex sum of ``|Psi(v, copy)|`` over the SAW copies of each vertex.

    The root copy counts with influence 1, so ``v`` itself gets at least 1.
    """
    tree = build_saw_tree(condition(system, pinning), v, depth_cap)
    influence = tree_influence(tree)
    bound = {u: 0.0 for u in range(system.n)}
    bound[v] = 1.0
    for i, node in enumerate(tree.nodes):
        if i != tree.root:
            bound[node.origin] += float(influence.values[i])
    return bound
