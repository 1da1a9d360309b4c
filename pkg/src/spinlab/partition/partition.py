"""
Degree partitions: the block structures every block dynamics runs on.

Construction is whole-assignment rejection: every vertex of the cover draws a
uniform block index, the matching verifier runs, and the round repeats on
failure.  Rounds are grouped into independent copies with a per-copy budget;
the first successful copy wins.
"""
import json
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..core.exceptions import ConsistencyError, ConstructionError, DomainError
from ..core.graph import Graph
from ..dynamics.rng import RandomStream
from ..models.schemas import PartitionSpec
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

GENERAL = "general"
BALANCED = "balanced"
BIPARTITE_LEFT = "bipartite_left"
MODES = (GENERAL, BALANCED, BIPARTITE_LEFT)


@dataclass(frozen=True)
class Partition:
    """Ordered blocks ``U_1..U_k`` partitioning ``cover``; blocks may be empty."""

    k: int
    blocks: Tuple[FrozenSet[int], ...]
    cover: FrozenSet[int]

    def __post_init__(self) -> None:
        if self.k < 1 or len(self.blocks) != self.k:
            raise ConsistencyError("partition needs exactly k >= 1 blocks", {"k": self.k})
        seen: set = set()
        for i, block in enumerate(self.blocks):
            if seen & block:
                raise ConsistencyError("blocks overlap", {"block": i})
            seen |= block
        if seen != set(self.cover):
            raise ConsistencyError("blocks do not cover the declared vertex set")

    @classmethod
    def from_blocks(cls, blocks: Sequence[Iterable[int]], cover: Optional[Iterable[int]] = None) -> "Partition":
        frozen = tuple(frozenset(int(v) for v in b) for b in blocks)
        union = frozenset().union(*frozen) if frozen else frozenset()
        return cls(len(frozen), frozen, frozenset(cover) if cover is not None else union)

    @classmethod
    def from_assignment(
        cls, assignment: Sequence[int], k: int, vertices: Optional[Sequence[int]] = None
    ) -> "Partition":
        """``assignment[j]`` is the block of ``vertices[j]`` (default: vertex ``j``)."""
        vertices = list(vertices) if vertices is not None else list(range(len(assignment)))
        blocks: List[set] = [set() for _ in range(k)]
        for v, i in zip(vertices, assignment):
            if not 0 <= i < k:
                raise DomainError("block index out of range", {"vertex": v, "index": int(i)})
            blocks[int(i)].add(int(v))
        return cls(k, tuple(frozenset(b) for b in blocks), frozenset(vertices))

    @classmethod
    def trivial(cls, cover: Iterable[int]) -> "Partition":
        cover = frozenset(cover)
        return cls(1, (cover,), cover)

    @cached_property
    def _block_index(self) -> Dict[int, int]:
        return {v: i for i, block in enumerate(self.blocks) for v in block}

    def block_of(self, v: int) -> int:
        try:
            return self._block_index[v]
        except KeyError as e:
            raise DomainError("vertex not covered by the partition", {"vertex": v}) from e

    def union(self, indices: Iterable[int]) -> FrozenSet[int]:
        out: FrozenSet[int] = frozenset()
        for i in indices:
            out = out | self.blocks[i]
        return out

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def assignment_array(self, n: int) -> np.ndarray:
        """Block index per vertex, ``-1`` outside the cover."""
        out = np.full(n, -1, dtype=np.int64)
        for i, block in enumerate(self.blocks):
            out[list(block)] = i
        return out

    def subset(self, indices: Sequence[int]) -> "Partition":
        """Partition formed by the listed blocks, in the given order."""
        chosen = [self.blocks[i] for i in indices]
        return Partition(len(chosen), tuple(chosen), frozenset().union(*chosen) if chosen else frozenset())

    def to_spec(self) -> PartitionSpec:
        return PartitionSpec(k=self.k, blocks=[sorted(b) for b in self.blocks])

    def to_json(self) -> str:
        return self.to_spec().model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str, cover: Optional[Iterable[int]] = None) -> "Partition":
        spec = PartitionSpec.model_validate(json.loads(text))
        return cls.from_blocks(spec.blocks, cover)


@dataclass(frozen=True)
class PartitionCheck:
    ok: bool
    bound: float
    worst_vertex: int
    worst_block: int
    worst_count: int


def _neighbor_block_counts(graph: Graph, p: Partition) -> np.ndarray:
    n = graph.vertex_count
    assignment = p.assignment_array(n)
    counts = np.zeros((n, p.k), dtype=np.int64)
    edges = np.array(graph.edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    covered = assignment[dst] >= 0
    np.add.at(counts, (src[covered], assignment[dst[covered]]), 1)
    return counts


def _check(counts: np.ndarray, rows: Sequence[int], bound: float) -> PartitionCheck:
    if len(rows) == 0 or counts.size == 0:
        return PartitionCheck(True, bound, -1, -1, 0)
    sub = counts[list(rows)]
    flat = int(np.argmax(sub))
    r, i = divmod(flat, sub.shape[1])
    worst = int(sub[r, i])
    return PartitionCheck(worst <= bound + 1e-12, bound, int(list(rows)[r]), int(i), worst)


def verify_degree_partition(graph: Graph, p: Partition, xi: float) -> PartitionCheck:
    """Every vertex has at most ``(1 + xi) * Delta / k`` neighbors in every block."""
    bound = (1.0 + xi) * graph.max_degree / p.k
    return _check(_neighbor_block_counts(graph, p), range(graph.vertex_count), bound)


def verify_balanced(p: Partition) -> bool:
    """Every block holds at least ``|cover| / (2k)`` vertices."""
    return min(p.sizes) >= len(p.cover) / (2.0 * p.k)


def verify_left_partition(graph: Graph, p: Partition, bound: int) -> PartitionCheck:
    """Blocks cover the left part; each right vertex sees at most ``bound`` neighbors per block."""
    if p.cover != graph.left:
        raise ConsistencyError("left partition must cover exactly the left part")
    return _check(_neighbor_block_counts(graph, p), sorted(graph.right), float(bound))


def lll_condition(delta: int, k: int, xi: float) -> bool:
    """Local-lemma inequality ``e * Delta^2 * k * exp(-2 xi^2 Delta / k^2) < 1``."""
    if delta <= 0:
        return False
    return math.e * delta ** 2 * k * math.exp(-2.0 * xi ** 2 * delta / k ** 2) < 1.0


def bipartite_lll_condition(delta_left: int, theta: float, k: int) -> bool:
    """``e * theta^2 * Delta_L^2 * k * exp(-Delta_L / (2 theta)) < 1``."""
    if delta_left <= 0:
        return False
    return math.e * theta ** 2 * delta_left ** 2 * k * math.exp(-delta_left / (2.0 * theta)) < 1.0


def lll_degree_threshold(k: int, xi: float = 1.0) -> int:
    """Smallest integer ``Delta`` from which the local-lemma inequality holds for good."""

    def slack(d: float) -> float:
        return 1.0 + 2.0 * math.log(d) + math.log(k) - 2.0 * xi ** 2 * d / k ** 2

    peak = k ** 2 / xi ** 2
    if slack(max(peak, 1.0)) < 0:
        return 1
    upper = 2.0 * peak
    while slack(upper) >= 0:
        upper *= 2.0
    root = brentq(slack, max(peak, 1.0), upper)
    delta0 = math.ceil(root)
    while not lll_condition(delta0, k, xi):
        delta0 += 1
    return delta0


@dataclass(frozen=True)
class PartitionParameters:
    k: int
    xi: float
    delta0: int
    constant: float


def partition_parameters(M: float, eta: float) -> PartitionParameters:
    """``k = ceil(4 ceil(M) / eta)``, ``xi = 1`` and the local-lemma degree threshold.

    ``constant`` is ``delta0 / (k^2 log k)``, the explicit constant in front of
    the ``k^2 log k`` growth.
    """
    if M <= 0 or eta <= 0:
        raise DomainError("M and eta must be positive", {"M": M, "eta": eta})
    k = math.ceil(4 * math.ceil(M) / eta)
    xi = 1.0
    delta0 = lll_degree_threshold(k, xi)
    constant = delta0 / (k ** 2 * math.log(k)) if k > 1 else math.nan
    return PartitionParameters(k, xi, delta0, constant)


def bipartite_partition_parameters(theta: float, M: int) -> int:
    return max(math.ceil(2 * theta), 10 * int(M))


@dataclass
class ConstructionStats:
    copies: int
    rounds_per_copy: List[int] = field(default_factory=list)
    budget_per_copy: int = 0
    successful_copy: Optional[int] = None
    elapsed_seconds: float = 0.0

    @property
    def total_rounds(self) -> int:
        return sum(self.rounds_per_copy)

    def as_dict(self) -> Dict[str, object]:
        return {
            "copies": self.copies,
            "rounds_per_copy": list(self.rounds_per_copy),
            "budget_per_copy": self.budget_per_copy,
            "successful_copy": self.successful_copy,
            "total_rounds": self.total_rounds,
            "elapsed_seconds": self.elapsed_seconds,
        }


def _expected_rounds(graph: Graph, k: int, xi: float, mode: str, bound: Optional[int]) -> Tuple[int, bool]:
    """Local-lemma estimate of the expected number of rounds, and whether it applies."""
    max_rounds = get_config().get_int("partition.max_rounds", 10000)
    if mode == BIPARTITE_LEFT:
        delta_left = bound if bound is not None else max((graph.degree(v) for v in graph.left), default=0)
        right_degree = max((graph.degree(v) for v in graph.right), default=0)
        theta = right_degree / delta_left if delta_left else math.inf
        holds = bipartite_lll_condition(delta_left, theta, k)
        dependency, events = theta ** 2 * delta_left ** 2, len(graph.right)
    else:
        delta = graph.max_degree
        holds = lll_condition(delta, k, xi)
        dependency, events = delta ** 2 - 1, graph.vertex_count
    if not holds or not math.isfinite(dependency):
        return max_rounds, False
    log_success = events * math.log1p(-1.0 / (dependency + 1.0))
    return int(min(max_rounds, math.ceil(math.exp(-log_success)))), True


def _round_ok(graph: Graph, p: Partition, xi: float, mode: str, bound: Optional[int]) -> bool:
    if mode == BIPARTITE_LEFT:
        return verify_left_partition(graph, p, bound).ok
    if not verify_degree_partition(graph, p, xi).ok:
        return False
    return mode != BALANCED or verify_balanced(p)


def construct_partition(
    graph: Graph,
    k: int,
    xi: float,
    mode: str,
    stream: RandomStream,
    epsilon: Optional[float] = None,
    max_round_time_factor: Optional[float] = None,
    bound: Optional[int] = None,
) -> Tuple[Partition, ConstructionStats]:
    """Randomized construction of a verified partition.

    Runs ``ceil(log2(2 / epsilon))`` copies, each allowed
    ``max_round_time_factor`` times the expected number of rounds.  In
    ``bipartite_left`` mode the blocks cover the left part and ``bound``
    (default: the maximum left degree) caps neighbors per block of every right
    vertex.  Raises ``ConstructionError`` with the statistics when every copy
    runs out of budget.
    """
    if mode not in MODES:
        raise DomainError(f"Unknown partition mode: {mode}")
    if k < 1:
        raise DomainError("k must be positive", {"k": k})
    config = get_config()
    epsilon = epsilon if epsilon is not None else config.get_float("partition.epsilon", 0.01)
    factor = max_round_time_factor or config.get_float("partition.max_round_time_factor", 2.0)
    if mode == BIPARTITE_LEFT:
        cover = sorted(graph.left)
        if bound is None:
            bound = max((graph.degree(v) for v in cover), default=0)
    else:
        cover = list(range(graph.vertex_count))

    if k == 1:
        p = Partition.trivial(cover)
        if not _round_ok(graph, p, xi, mode, bound):
            stats = ConstructionStats(copies=1, rounds_per_copy=[0])
            logger.error(f"The single-block {mode} partition fails its check (bound={bound})")
            raise ConstructionError("no single-block partition satisfies the constraints", stats.as_dict())
        return p, ConstructionStats(copies=1, rounds_per_copy=[0], successful_copy=0)

    expected, guaranteed = _expected_rounds(graph, k, xi, mode, bound)
    if not guaranteed:
        logger.warning(
            f"Local-lemma condition fails for k={k}, xi={xi}, mode={mode}; "
            "existence of the partition is not guaranteed"
        )
    copies = max(1, math.ceil(math.log2(2.0 / epsilon)))
    budget = max(1, int(math.ceil(factor * expected)))
    stats = ConstructionStats(copies=copies, budget_per_copy=budget)
    started = time.perf_counter()
    logger.info(f"Constructing {mode} partition: n={graph.vertex_count}, k={k}, copies={copies}, budget={budget}")

    for copy in range(copies):
        copy_stream = stream.child(copy)
        for attempt in range(1, budget + 1):
            assignment = copy_stream.integers(0, k, size=len(cover))
            candidate = Partition.from_assignment(assignment, k, cover)
            if _round_ok(graph, candidate, xi, mode, bound):
                stats.rounds_per_copy.append(attempt)
                stats.successful_copy = copy
                stats.elapsed_seconds = time.perf_counter() - started
                logger.debug(f"Partition found in copy {copy} after {attempt} rounds")
                return candidate, stats
        stats.rounds_per_copy.append(budget)

    stats.elapsed_seconds = time.perf_counter() - started
    logger.error(f"Failed to construct partition after {stats.total_rounds} rounds")
    raise ConstructionError("partition construction exhausted its budget", stats.as_dict())
