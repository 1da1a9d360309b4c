"""
Spin systems, pinnings and their weights.

A ``SpinSystem`` keeps the base fields and interactions it was built with plus
an accumulated pinning.  Interactions between a free vertex and a pinned one
are folded into the free vertex's field (``SpinSystem.field``); edges with
both ends pinned are inert.  Configurations are always full assignments on
``V`` with 0-based spin indices.
"""
import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import (
    Any,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from .exceptions import ConsistencyError, DomainError
from .graph import Graph
from ..utils.config import get_config

SPIN_MINUS = 0
SPIN_PLUS = 1

Config = Union[Sequence[int], np.ndarray]


class PartialConfig(Mapping[int, int]):
    """Immutable assignment of spins to a subset of vertices."""

    __slots__ = ("_items",)

    def __init__(self, assignments: Optional[Union[Mapping[int, int], Iterable[Tuple[int, int]]]] = None):
        items = dict(assignments or {})
        self._items: Dict[int, int] = {int(k): int(v) for k, v in sorted(items.items())}

    def __getitem__(self, vertex: int) -> int:
        return self._items[vertex]

    def __iter__(self) -> Iterator[int]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return hash(tuple(self._items.items()))

    def __repr__(self) -> str:
        return f"PartialConfig({self._items})"

    @property
    def assignments(self) -> Dict[int, int]:
        return dict(self._items)

    @property
    def vertices(self) -> FrozenSet[int]:
        return frozenset(self._items)

    @classmethod
    def from_config(cls, config: Config, vertices: Iterable[int]) -> "PartialConfig":
        return cls({int(v): int(config[v]) for v in vertices})

    def merge(self, other: Mapping[int, int]) -> "PartialConfig":
        merged = dict(self._items)
        for v, c in other.items():
            if v in merged and merged[v] != c:
                raise ConsistencyError(
                    "conflicting pinning", {"vertex": v, "existing": merged[v], "new": c}
                )
            merged[int(v)] = int(c)
        return PartialConfig(merged)

    def restrict(self, vertices: Iterable[int]) -> "PartialConfig":
        keep = set(vertices)
        return PartialConfig({v: c for v, c in self._items.items() if v in keep})

    def to_json(self) -> Dict[str, int]:
        return {str(v): c for v, c in self._items.items()}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "PartialConfig":
        return cls({int(k): int(v) for k, v in data.items()})


@dataclass(frozen=True)
class HammingWeight:
    """Positive integer weight per vertex."""

    weight: Tuple[int, ...]

    def __post_init__(self) -> None:
        for v, w in enumerate(self.weight):
            if int(w) != w or w < 1:
                raise DomainError("Hamming weights must be integers >= 1", {"vertex": v, "weight": w})

    @classmethod
    def unit(cls, n: int) -> "HammingWeight":
        return cls(tuple([1] * n))

    def __getitem__(self, v: int) -> int:
        return self.weight[v]

    def __len__(self) -> int:
        return len(self.weight)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weight, dtype=np.int64)


def hamming_distance(
    rho: HammingWeight,
    a: Union[Mapping[int, int], Config],
    b: Union[Mapping[int, int], Config],
) -> int:
    """Weighted Hamming distance between two (partial) configurations."""
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)):
            raise DomainError("cannot compare a partial configuration with a full one")
        if set(a) != set(b):
            raise DomainError("configurations are defined on different vertex sets")
        return int(sum(rho[v] for v in a if a[v] != b[v]))
    x, y = np.asarray(a), np.asarray(b)
    if x.shape != y.shape or x.shape[-1] != len(rho):
        raise DomainError("configurations are defined on different vertex sets")
    return int(((x != y) * rho.as_array()).sum())


def hamming_distance_batch(rho: HammingWeight, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Row-wise weighted Hamming distances of two ``R x n`` arrays."""
    if xs.shape != ys.shape:
        raise DomainError("batches have different shapes")
    return (xs != ys).astype(np.int64) @ rho.as_array()


@dataclass(frozen=True)
class ModelInfo:
    """Name and parameters of the model a system was built from."""

    name: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """Gibbs specification on a graph, possibly conditioned on a pinning.

    ``interaction`` is an ``m x q x q`` array aligned with ``graph.edges``;
    entry ``[e, a, b]`` is ``A_e(a, b)`` for edge ``e = (u, v)``, ``u < v``.
    ``edge_pins`` maps ``(w, u)`` to the spin that the pinned vertex ``w``
    presents to its neighbor ``u``; it is how a split vertex shows different
    values to different neighbors.
    """

    graph: Graph
    q: int
    domain: Tuple[FrozenSet[int], ...]
    base_field: np.ndarray
    interaction: np.ndarray
    pinning: PartialConfig = field(default_factory=PartialConfig)
    edge_pins: Tuple[Tuple[Tuple[int, int], int], ...] = ()
    model: Optional[ModelInfo] = None

    @classmethod
    def create(
        cls,
        graph: Graph,
        q: int,
        fields: Union[np.ndarray, Sequence[Sequence[float]]],
        interaction: Union[np.ndarray, Mapping[Tuple[int, int], Any]],
        domain: Optional[Sequence[Iterable[int]]] = None,
        pinning: Optional[Mapping[int, int]] = None,
        model: Optional[ModelInfo] = None,
    ) -> "SpinSystem":
        """Validate inputs and build a system.

        ``interaction`` is either one ``q x q`` matrix shared by every edge or a
        mapping from edges to matrices.
        """
        n = graph.vertex_count
        if q < 2:
            raise DomainError("q must be at least 2", {"q": q})
        base = np.array(fields, dtype=float)
        if base.ndim == 1:
            base = np.tile(base, (n, 1))
        if base.shape != (n, q):
            raise ConsistencyError("fields must be an n x q array", {"shape": base.shape})
        if np.any(base < 0) or not np.all(np.isfinite(base)):
            raise DomainError("fields must be finite and nonnegative")

        edges = graph.edges
        if isinstance(interaction, Mapping):
            mats = []
            for u, v in edges:
                matrix = interaction.get((u, v), interaction.get((v, u)))
                if matrix is None:
                    raise ConsistencyError("missing interaction matrix", {"edge": (u, v)})
                mats.append(np.array(matrix, dtype=float))
            inter = np.array(mats, dtype=float).reshape(len(edges), q, q)
        else:
            matrix = np.array(interaction, dtype=float)
            if matrix.shape != (q, q):
                raise ConsistencyError("interaction must be q x q", {"shape": matrix.shape})
            inter = np.tile(matrix, (len(edges), 1, 1))
        if np.any(inter < 0) or not np.all(np.isfinite(inter)):
            raise DomainError("interactions must be finite and nonnegative")
        if not np.array_equal(inter, np.transpose(inter, (0, 2, 1))):
            raise ConsistencyError("interaction matrices must be symmetric")

        if domain is None:
            doms = tuple(frozenset(range(q)) for _ in range(n))
        else:
            doms = tuple(frozenset(int(c) for c in d) for d in domain)
            if len(doms) != n:
                raise ConsistencyError("one domain per vertex is required")
            for v, d in enumerate(doms):
                if not d:
                    raise DomainError("domains must be nonempty", {"vertex": v})
                if not d <= frozenset(range(q)):
                    raise DomainError("domain value outside [q]", {"vertex": v})

        base.setflags(write=False)
        inter.setflags(write=False)
        system = cls(graph, q, doms, base, inter, PartialConfig(), (), model)
        if pinning:
            system = condition(system, pinning)
        return system

    # Structure

    @property
    def n(self) -> int:
        return self.graph.vertex_count

    @cached_property
    def edge_index(self) -> Dict[Tuple[int, int], int]:
        index: Dict[Tuple[int, int], int] = {}
        for i, (u, v) in enumerate(self.graph.edges):
            index[(u, v)] = i
            index[(v, u)] = i
        return index

    def interaction_between(self, u: int, v: int) -> np.ndarray:
        """``A(σ_u, σ_v)`` oriented with ``u``'s spin on the rows."""
        return self.interaction[self.edge_index[(u, v)]]

    @cached_property
    def free_mask(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.pinning)] = False
        mask.setflags(write=False)
        return mask

    @cached_property
    def free_vertices(self) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.flatnonzero(self.free_mask))

    def is_pinned(self, v: int) -> bool:
        return v in self.pinning

    @cached_property
    def domain_mask(self) -> np.ndarray:
        mask = np.zeros((self.n, self.q), dtype=bool)
        for v, d in enumerate(self.domain):
            mask[v, list(d)] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def _edge_pin_map(self) -> Dict[Tuple[int, int], int]:
        return dict(self.edge_pins)

    def presented_spin(self, w: int, u: int) -> int:
        """Spin the pinned vertex ``w`` presents to neighbor ``u``."""
        return self._edge_pin_map.get((w, u), self.pinning[w])

    @cached_property
    def field(self) -> np.ndarray:
        """Base fields with pinned-neighbor interactions folded in, zero outside domains."""
        folded = np.array(self.base_field, dtype=float) * self.domain_mask
        for w in self.pinning:
            for u in self.graph.neighbors(w):
                if self.free_mask[u]:
                    folded[u] *= self.interaction_between(u, w)[:, self.presented_spin(w, u)]
        folded.setflags(write=False)
        return folded

    @cached_property
    def free_edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Endpoints and matrices of edges with both ends free."""
        rows = [
            i for i, (u, v) in enumerate(self.graph.edges)
            if self.free_mask[u] and self.free_mask[v]
        ]
        us = np.array([self.graph.edges[i][0] for i in rows], dtype=np.int64)
        vs = np.array([self.graph.edges[i][1] for i in rows], dtype=np.int64)
        mats = self.interaction[rows] if rows else np.zeros((0, self.q, self.q))
        return us, vs, mats

    @cached_property
    def pinned_log_factor(self) -> float:
        """Log of the factors that depend on the pinning alone."""
        total = 0.0
        with np.errstate(divide="ignore"):
            for w, c in self.pinning.items():
                total += float(np.log(self.base_field[w, c]))
            for i, (u, v) in enumerate(self.graph.edges):
                if not self.free_mask[u] and not self.free_mask[v]:
                    a, b = self.presented_spin(u, v), self.presented_spin(v, u)
                    total += float(np.log(self.interaction[i, a, b]))
        return total

    @cached_property
    def neighbor_tables(self) -> Tuple[np.ndarray, np.ndarray]:
        """Padded neighbor table and per-slot interaction matrices.

        Slots of pinned or padding neighbors carry all-ones matrices, so the
        product over slots reproduces the single-site conditional weights.
        """
        table = self.graph.padded_neighbors()
        mats = np.ones(table.shape + (self.q, self.q))
        for v in range(self.n):
            for j, u in enumerate(self.graph.neighbors(v)):
                if self.free_mask[u]:
                    mats[v, j] = self.interaction_between(v, u)
        table = np.where(table < 0, 0, table)
        return table, mats

    @property
    def model_params(self) -> Dict[str, Any]:
        """(beta, gamma, lambda) style parameters of the originating model."""
        if self.model is None:
            raise ConsistencyError("system was not built from a named model")
        return dict(self.model.params)

    @property
    def is_two_spin(self) -> bool:
        return self.q == 2

    @cached_property
    def log_space(self) -> bool:
        positive = np.concatenate([self.base_field.ravel(), self.interaction.ravel()])
        positive = positive[positive > 0]
        if positive.size == 0:
            return False
        extreme = max(abs(math.log(positive.max())), abs(math.log(positive.min())))
        threshold = get_config().get_float("weights.log_space_threshold", 600.0)
        return self.n * extreme > threshold

    @cached_property
    def _base_digest(self) -> bytes:
        h = hashlib.sha1()
        h.update(self.graph.key.encode())
        h.update(str(self.q).encode())
        h.update(repr(sorted(tuple(sorted(d)) for d in self.domain)).encode())
        h.update(np.ascontiguousarray(self.base_field).tobytes())
        h.update(np.ascontiguousarray(self.interaction).tobytes())
        return h.digest()

    @cached_property
    def fingerprint(self) -> str:
        """Hashable identity of the conditional distribution this system defines."""
        h = hashlib.sha1(self._base_digest)
        h.update(repr(tuple(self.pinning.items())).encode())
        h.update(repr(self.edge_pins).encode())
        return h.hexdigest()

    # Single-site conditionals

    def conditional_weights(self, v: int, config: Config) -> np.ndarray:
        """Unnormalized conditional weights of ``v`` given the rest of ``config``."""
        if not self.free_mask[v]:
            out = np.zeros(self.q)
            out[self.pinning[v]] = 1.0
            return out
        weights = np.array(self.field[v], dtype=float)
        for u in self.graph.neighbors(v):
            if self.free_mask[u]:
                weights *= self.interaction_between(v, u)[:, int(config[u])]
        return weights

    def with_pinning(
        self,
        assignments: Mapping[int, int],
        edge_values: Optional[Mapping[Tuple[int, int], int]] = None,
    ) -> "SpinSystem":
        pinning = self.pinning.merge(assignments)
        edge_pins = dict(self.edge_pins)
        if edge_values:
            edge_pins.update(edge_values)
        return dataclasses.replace(
            self, pinning=pinning, edge_pins=tuple(sorted(edge_pins.items()))
        )


def _check_config(system: SpinSystem, config: Config) -> np.ndarray:
    x = np.asarray(config, dtype=np.int64)
    if x.shape != (system.n,):
        raise DomainError("configuration must assign every vertex", {"length": x.shape})
    if np.any(x < 0) or np.any(x >= system.q) or not np.all(system.domain_mask[np.arange(system.n), x]):
        bad = [v for v in range(system.n) if not (0 <= x[v] < system.q) or x[v] not in system.domain[v]]
        raise DomainError("spin outside the vertex domain", {"vertices": bad})
    return x


def _agrees(system: SpinSystem, x: np.ndarray) -> bool:
    return all(x[v] == c for v, c in system.pinning.items())


def _free_log_weight(system: SpinSystem, x: np.ndarray) -> float:
    free = np.asarray(system.free_vertices, dtype=np.int64)
    us, vs, mats = system.free_edges
    with np.errstate(divide="ignore"):
        total = float(np.log(system.field[free, x[free]]).sum())
        if len(us):
            total += float(np.log(mats[np.arange(len(us)), x[us], x[vs]]).sum())
    return total


def log_weight(system: SpinSystem, config: Config) -> float:
    """Natural log of ``weight``; ``-inf`` for zero weight."""
    x = _check_config(system, config)
    if not _agrees(system, x):
        return -math.inf
    return _free_log_weight(system, x) + system.pinned_log_factor


def weight(system: SpinSystem, config: Config) -> float:
    """Gibbs weight of a full configuration under the system's pinning.

    Zero when the configuration disagrees with the pinning.  For configurations
    that agree, the value equals the weight in the unpinned system.
    """
    x = _check_config(system, config)
    if not _agrees(system, x):
        return 0.0
    if system.log_space:
        return math.exp(_free_log_weight(system, x) + system.pinned_log_factor)
    free = np.asarray(system.free_vertices, dtype=np.int64)
    us, vs, mats = system.free_edges
    value = float(np.prod(system.field[free, x[free]]))
    if len(us):
        value *= float(np.prod(mats[np.arange(len(us)), x[us], x[vs]]))
    return value * math.exp(system.pinned_log_factor) if system.pinning else value


def condition(system: SpinSystem, tau: Mapping[int, int]) -> SpinSystem:
    """Return the system conditioned on the additional pinning ``tau``."""
    for v, c in tau.items():
        if not 0 <= v < system.n:
            raise DomainError("pinned vertex out of range", {"vertex": v})
        if c not in system.domain[v]:
            raise DomainError("pinned value outside the vertex domain", {"vertex": v, "value": c})
    if not tau:
        return system
    return system.with_pinning(tau)


def split_vertex(system: SpinSystem, v: int, edge_values: Mapping[int, int], pin_value: int) -> SpinSystem:
    """Pin ``v`` while presenting ``edge_values[u]`` to each free neighbor ``u``.

    This is the vertex-splitting step of the recursive couplings: the copy of
    ``v`` attached to ``u`` carries its own spin.  Neighbors absent from
    ``edge_values`` see ``pin_value``.
    """
    if system.is_pinned(v):
        raise ConsistencyError("cannot split a pinned vertex", {"vertex": v})
    for u, c in edge_values.items():
        if u not in system.graph.neighbors(v):
            raise ConsistencyError("edge value for a non-neighbor", {"vertex": v, "neighbor": u})
        if not 0 <= c < system.q:
            raise DomainError("edge value outside [q]", {"value": c})
    return system.with_pinning({v: pin_value}, {(v, u): c for u, c in edge_values.items()})


def config_to_string(config: Config, q: int) -> str:
    """Serialize a configuration: ``-``/``+`` for two spins, digits or dotted ints otherwise."""
    if q == 2:
        return "".join("+" if int(c) == SPIN_PLUS else "-" for c in config)
    if q <= 10:
        return "".join(str(int(c)) for c in config)
    return ".".join(str(int(c)) for c in config)


def config_from_string(text: str, q: int) -> Tuple[int, ...]:
    if q == 2:
        return tuple(SPIN_PLUS if ch == "+" else SPIN_MINUS for ch in text)
    if q <= 10:
        return tuple(int(ch) for ch in text)
    return tuple(int(part) for part in text.split("."))
