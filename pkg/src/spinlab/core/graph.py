"""
Undirected simple graphs with an explicit vertex order and optional bipartition.

Text format (one graph per file)::

    n m [bipartite l r]
    u v
    ...

with 0-based vertex indices.  For bipartite files the left part is
``0..l-1`` and the right part is ``l..l+r-1``.
"""
import itertools
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from .exceptions import ConsistencyError, DomainError
from ..utils.logger import get_logger

logger = get_logger(__name__)

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Immutable simple graph on vertices ``0..vertex_count-1``."""

    vertex_count: int
    adjacency: Tuple[Tuple[int, ...], ...]
    bipartition: Optional[Tuple[FrozenSet[int], FrozenSet[int]]] = None
    vertex_order: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        n = self.vertex_count
        if n < 0 or len(self.adjacency) != n:
            raise ConsistencyError("adjacency must list every vertex", {"n": n})
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ConsistencyError("neighbor lists must be sorted without repeats", {"vertex": v})
            for u in nbrs:
                if not 0 <= u < n:
                    raise ConsistencyError("neighbor out of range", {"vertex": v, "neighbor": u})
                if u == v:
                    raise ConsistencyError("self-loops are not allowed", {"vertex": v})
                if v not in self.adjacency[u]:
                    raise ConsistencyError("adjacency is not symmetric", {"edge": (v, u)})
        if self.vertex_order is not None and sorted(self.vertex_order) != list(range(n)):
            raise ConsistencyError("vertex_order must be a permutation of the vertices")
        if self.bipartition is not None:
            left, right = self.bipartition
            if left & right or (left | right) != frozenset(range(n)):
                raise ConsistencyError("bipartition must split the vertex set")
            for u, v in self.edges:
                if (u in left) == (v in left):
                    raise ConsistencyError("bipartite edge inside one part", {"edge": (u, v)})

    # Constructors

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence[int]],
        bipartition: Optional[Tuple[Iterable[int], Iterable[int]]] = None,
        vertex_order: Optional[Sequence[int]] = None,
    ) -> "Graph":
        neighbors: List[set] = [set() for _ in range(n)]
        for edge in edges:
            u, v = int(edge[0]), int(edge[1])
            if not (0 <= u < n and 0 <= v < n):
                raise ConsistencyError("edge endpoint out of range", {"edge": (u, v), "n": n})
            if u == v:
                raise ConsistencyError("self-loops are not allowed", {"vertex": u})
            if v in neighbors[u]:
                raise ConsistencyError("parallel edges are not allowed", {"edge": (u, v)})
            neighbors[u].add(v)
            neighbors[v].add(u)
        parts = None
        if bipartition is not None:
            parts = (frozenset(bipartition[0]), frozenset(bipartition[1]))
        order = tuple(vertex_order) if vertex_order is not None else None
        return cls(n, tuple(tuple(sorted(s)) for s in neighbors), parts, order)

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        if n < 3:
            raise DomainError("a cycle needs at least 3 vertices", {"n": n})
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls.from_edges(n, itertools.combinations(range(n), 2))

    @classmethod
    def star(cls, leaves: int) -> "Graph":
        """Star with center 0 and leaves ``1..leaves``."""
        return cls.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])

    @classmethod
    def complete_bipartite(cls, left: int, right: int) -> "Graph":
        edges = [(i, left + j) for i in range(left) for j in range(right)]
        return cls.from_edges(
            left + right, edges, (range(left), range(left, left + right))
        )

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> "Graph":
        mapping = {node: i for i, node in enumerate(sorted(g.nodes()))}
        edges = [(mapping[u], mapping[v]) for u, v in g.edges()]
        bipartition = None
        if all("bipartite" in data for _, data in g.nodes(data=True)) and g.number_of_nodes():
            left = [mapping[u] for u, d in g.nodes(data=True) if d["bipartite"] == 0]
            right = [mapping[u] for u, d in g.nodes(data=True) if d["bipartite"] == 1]
            bipartition = (left, right)
        return cls.from_edges(len(mapping), edges, bipartition)

    @classmethod
    def random_regular(cls, n: int, d: int, seed: int) -> "Graph":
        if (n * d) % 2 or d >= n:
            raise DomainError("no simple d-regular graph on n vertices", {"n": n, "d": d})
        return cls.from_networkx(nx.random_regular_graph(d, n, seed=seed))

    @classmethod
    def random_bipartite(cls, n_left: int, d_left: int, n_right: int, seed: int) -> "Graph":
        """Random bipartite graph with left degrees <= d_left and balanced right degrees.

        Built with the bipartite configuration model; parallel edges collapse, so
        degrees are upper bounds.
        """
        total = n_left * d_left
        base, extra = divmod(total, n_right)
        right_degrees = [base + (1 if j < extra else 0) for j in range(n_right)]
        g = nx.bipartite.configuration_model(
            [d_left] * n_left, right_degrees, create_using=nx.Graph(), seed=seed
        )
        edges = list(g.edges())
        return cls.from_edges(
            n_left + n_right, edges, (range(n_left), range(n_left, n_left + n_right))
        )

    # Queries

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple((u, v) for u in range(self.vertex_count) for v in self.adjacency[u] if u < v)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def induced_max_degree(self, subset: Iterable[int]) -> int:
        members = set(subset)
        return max((sum(1 for u in self.adjacency[v] if u in members) for v in members), default=0)

    @cached_property
    def rank(self) -> Tuple[int, ...]:
        """Position of each vertex in the total order."""
        if self.vertex_order is None:
            return tuple(range(self.vertex_count))
        ranks = [0] * self.vertex_count
        for position, v in enumerate(self.vertex_order):
            ranks[v] = position
        return tuple(ranks)

    def precedes(self, u: int, v: int) -> bool:
        return self.rank[u] < self.rank[v]

    def ordered_neighbors(self, v: int) -> List[int]:
        return sorted(self.adjacency[v], key=lambda u: self.rank[u])

    @property
    def left(self) -> FrozenSet[int]:
        if self.bipartition is None:
            raise ConsistencyError("graph has no bipartition")
        return self.bipartition[0]

    @property
    def right(self) -> FrozenSet[int]:
        if self.bipartition is None:
            raise ConsistencyError("graph has no bipartition")
        return self.bipartition[1]

    @cached_property
    def key(self) -> str:
        """Stable textual identity used in cache fingerprints."""
        return f"{self.vertex_count}:{self.edges}:{self.rank}"

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.vertex_count))
        g.add_edges_from(self.edges)
        if self.bipartition is not None:
            nx.set_node_attributes(g, {v: 0 if v in self.left else 1 for v in g.nodes}, "bipartite")
        return g

    def padded_neighbors(self) -> np.ndarray:
        """``n x max_degree`` neighbor table padded with ``-1``."""
        table = np.full((self.vertex_count, max(self.max_degree, 1)), -1, dtype=np.int64)
        for v, nbrs in enumerate(self.adjacency):
            table[v, : len(nbrs)] = nbrs
        return table


def is_triangle_free(graph: Graph) -> bool:
    return sum(nx.triangles(graph.to_networkx()).values()) == 0


def read_graph_file(path: Union[str, Path]) -> Graph:
    """Read the ``n m [bipartite l r]`` edge-list format."""
    path = Path(path)
    try:
        lines = [line.split() for line in path.read_text().splitlines() if line.strip()]
    except OSError as e:
        logger.error(f"Failed to read graph file {path}: {e}")
        raise
    if not lines:
        raise ConsistencyError("empty graph file", {"path": str(path)})
    header = lines[0]
    n, m = int(header[0]), int(header[1])
    bipartition = None
    if len(header) >= 2 + 3 and header[2] == "bipartite":
        l, r = int(header[3]), int(header[4])
        if l + r != n:
            raise ConsistencyError("bipartite sizes do not add up", {"n": n, "l": l, "r": r})
        bipartition = (range(l), range(l, n))
    edges = [(int(a), int(b)) for a, b in lines[1:]]
    if len(edges) != m:
        raise ConsistencyError("edge count mismatch", {"declared": m, "found": len(edges)})
    return Graph.from_edges(n, edges, bipartition)


def write_graph_file(graph: Graph, path: Union[str, Path]) -> None:
    header = f"{graph.vertex_count} {graph.edge_count}"
    if graph.bipartition is not None:
        left = sorted(graph.left)
        if left != list(range(len(left))):
            raise ConsistencyError("left part must be a prefix of the vertices to be written")
        header += f" bipartite {len(left)} {graph.vertex_count - len(left)}"
    body = "\n".join(f"{u} {v}" for u, v in graph.edges)
    Path(path).write_text(header + "\n" + body + ("\n" if body else ""))


def parse_graph_spec(spec: str) -> Graph:
    """Build a graph from a file path or a generator spec such as ``cycle:8``.

    Generators: ``path:n``, ``cycle:n``, ``complete:n``, ``star:leaves``,
    ``kbip:l:r``, ``regular:n:d:seed``, ``bipartite:nl:dl:nr:seed``.
    """
    if Path(spec).exists():
        return read_graph_file(spec)
    name, _, rest = spec.partition(":")
    try:
        args = [int(x) for x in rest.split(":")] if rest else []
    except ValueError as e:
        raise DomainError(f"Graph spec arguments must be integers: {spec}") from e
    builders: Dict[str, object] = {
        "path": Graph.path,
        "cycle": Graph.cycle,
        "complete": Graph.complete,
        "star": Graph.star,
        "kbip": Graph.complete_bipartite,
        "regular": lambda n, d, seed=0: Graph.random_regular(n, d, seed),
        "bipartite": lambda nl, dl, nr, seed=0: Graph.random_bipartite(nl, dl, nr, seed),
    }
    if name not in builders:
        raise DomainError(f"Unknown graph spec: {spec}")
    try:
        return builders[name](*args)  # type: ignore[operator]
    except TypeError as e:
        raise DomainError(f"Bad arguments for graph spec {spec}") from e
