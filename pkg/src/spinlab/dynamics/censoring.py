"""
Monotone systems and censored single-site dynamics.

``orders[v]`` lists the spins of ``v`` from lowest to highest; ``X <= Y``
compares configurations coordinatewise under these orders.
"""
import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .glauber import update_sites
from .rng import RandomStream
from .simdownup import UpdateSchedule
from ..core.exceptions import ConsistencyError, DomainError, StateCapError
from ..core.system import SpinSystem, weight
from ..oracle.exact import ExactDistribution, divergence, enumerate_gibbs
from ..oracle.matrices import heat_bath_matrix
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

Orders = Sequence[Sequence[int]]


def _rank_table(system: SpinSystem, orders: Orders) -> np.ndarray:
    """``n x q`` table: rank of each spin under the vertex's order, ``-1`` if absent."""
    if len(orders) != system.n:
        raise ConsistencyError("one order per vertex is required")
    table = np.full((system.n, system.q), -1, dtype=np.int64)
    for v, order in enumerate(orders):
        if (
            sorted(order) != sorted(set(order))
            or any(not 0 <= c < system.q for c in order)
            or not set(system.domain[v]) <= set(order)
        ):
            raise DomainError("order must list every spin of the vertex domain once", {"vertex": v})
        for position, c in enumerate(order):
            table[v, c] = position
    return table


def bipartite_orders(system: SpinSystem) -> List[Tuple[int, ...]]:
    """``+`` high on the left part, ``-`` high on the right part."""
    graph = system.graph
    return [(0, 1) if v in graph.left else (1, 0) for v in range(system.n)]


def max_state(system: SpinSystem, orders: Orders) -> np.ndarray:
    """The configuration taking every free vertex's highest spin."""
    config = np.array([order[-1] for order in orders], dtype=np.int64)
    for v, c in system.pinning.items():
        config[v] = c
    if weight(system, config) <= 0:
        raise ConsistencyError("the maximal configuration has zero weight")
    return config


@dataclass
class MonotoneReport:
    monotone: bool
    pairs_checked: int
    violation: Optional[Tuple[Tuple[int, ...], Tuple[int, ...], int]] = None


def _conditional_tails(system: SpinSystem, X: np.ndarray, v: int, ranks: np.ndarray) -> np.ndarray:
    """``K x q`` upper tails ``P(rank >= t)`` of the update at ``v``."""
    K = len(X)
    weights = np.tile(system.field[v], (K, 1))
    for u in system.graph.neighbors(v):
        if not system.is_pinned(u):
            weights *= system.interaction_between(v, u)[:, X[:, u]].T
    prob = weights / weights.sum(axis=1, keepdims=True)
    by_rank = np.zeros((K, system.q))
    for c in range(system.q):
        if ranks[v, c] >= 0:
            by_rank[:, ranks[v, c]] += prob[:, c]
    return np.cumsum(by_rank[:, ::-1], axis=1)[:, ::-1]


def check_monotone(system: SpinSystem, orders: Orders, tol: float = 1e-12) -> MonotoneReport:
    """Exhaustively test that every single-site update preserves ``<=``.

    For each comparable pair ``X <= Y`` of the support and each free ``v``
    the update distribution at ``X`` must be stochastically dominated by the
    one at ``Y``.  The first violating ``(X, Y, v)`` is reported.
    """
    ranks = _rank_table(system, orders)
    dist = enumerate_gibbs(system)
    cap = get_config().get_int("oracle.matrix_cap", 4096)
    if dist.size > cap:
        raise StateCapError("support too large for the monotonicity check", {"states": dist.size, "cap": cap})
    X = dist.support.astype(np.int64)
    R = ranks[np.arange(system.n)[None, :], X]
    below = (R[:, None, :] <= R[None, :, :]).all(axis=2)
    np.fill_diagonal(below, False)
    pairs = int(below.sum())
    for v in system.free_vertices:
        tails = _conditional_tails(system, X, v, ranks)
        bad = below & (tails[:, None, :] > tails[None, :, :] + tol).any(axis=2)
        if bad.any():
            i, j = (int(a) for a in np.argwhere(bad)[0])
            logger.info(f"Monotonicity fails at vertex {v}")
            return MonotoneReport(False, pairs, (tuple(int(c) for c in X[i]), tuple(int(c) for c in X[j]), v))
    return MonotoneReport(True, pairs)


def random_schedule(system: SpinSystem, length: int, stream: RandomStream) -> UpdateSchedule:
    """Uniform single-site update sequence over free vertices."""
    free = np.asarray(system.free_vertices, dtype=np.int64)
    if len(free) == 0:
        return UpdateSchedule()
    picks = free[stream.integers(0, len(free), size=length)]
    schedule = UpdateSchedule()
    for t, v in enumerate(picks):
        schedule.append(int(v), (t,))
    return schedule


def random_censor_masks(length: int, count: int, stream: RandomStream, p: float = 0.5) -> List[np.ndarray]:
    if not 0 <= p <= 1:
        raise DomainError("censoring probability must lie in [0, 1]", {"p": p})
    return [stream.random(length) < p for _ in range(count)]


class _SiteKernels:
    """Lazily built single-site heat-bath matrices on the support."""

    def __init__(self, system: SpinSystem):
        self.dist = enumerate_gibbs(system)
        self._cache: Dict[int, np.ndarray] = {}

    def __getitem__(self, v: int) -> np.ndarray:
        if v not in self._cache:
            self._cache[v] = heat_bath_matrix(self.dist, [frozenset({v})])
        return self._cache[v]


def _start_index(dist: ExactDistribution, start: np.ndarray) -> int:
    i = int(dist.index.lookup(np.asarray(start))[0])
    if i < 0:
        raise ConsistencyError("start state is outside the support")
    return i


def _evolve(kernels: _SiteKernels, start: int, vertices: Sequence[int]) -> np.ndarray:
    vec = np.zeros(kernels.dist.size)
    vec[start] = 1.0
    for v in vertices:
        vec = vec @ kernels[v]
    return vec


def censored_run(
    system: SpinSystem,
    schedule: UpdateSchedule,
    start: np.ndarray,
    engine: str = "exact",
    stream: Optional[RandomStream] = None,
    replicas: int = 1,
) -> Union[ExactDistribution, np.ndarray]:
    """Apply the uncensored updates of ``schedule`` from ``start``.

    ``exact`` evolves the distribution vector and returns it on the support;
    ``mc`` runs ``replicas`` trajectories and returns the final states.
    """
    vertices = schedule.uncensored()
    if engine == "exact":
        kernels = _SiteKernels(system)
        vec = _evolve(kernels, _start_index(kernels.dist, start), vertices)
        dist = kernels.dist
        return ExactDistribution(dist.vertices, dist.support, vec, dist.q)
    if engine == "mc":
        if stream is None:
            raise ConsistencyError("Monte Carlo engine needs a random stream")
        configs = np.tile(np.asarray(start, dtype=np.int64), (replicas, 1))
        for v in vertices:
            u = 1.0 - stream.random(replicas)
            update_sites(system, configs, np.full(replicas, v, dtype=np.int64), u)
        return configs
    raise DomainError(f"Unknown engine: {engine}")


@dataclass
class CensoringReport:
    masks_checked: int
    violations: int
    tv_full: float
    worst_margin: float
    worst_mask: Optional[Tuple[bool, ...]] = None

    @property
    def holds(self) -> bool:
        return self.violations == 0


def censoring_inequality_check(
    system: SpinSystem,
    schedule: UpdateSchedule,
    start: np.ndarray,
    masks: Optional[Sequence[Sequence[bool]]] = None,
    tol: float = 1e-12,
) -> CensoringReport:
    """``TV(full, mu) <= TV(censored, mu)`` for every mask (all ``2^len`` by default).

    ``worst_margin`` is the smallest ``TV(censored) - TV(full)`` seen.
    """
    length = len(schedule)
    if masks is None:
        if length > 16:
            raise StateCapError("too many censor masks to enumerate", {"length": length})
        masks = list(itertools.product((False, True), repeat=length))
    kernels = _SiteKernels(system)
    dist = kernels.dist
    start_index = _start_index(dist, start)

    def tv_of(vertices: Sequence[int]) -> float:
        vec = _evolve(kernels, start_index, vertices)
        return divergence("tv", ExactDistribution(dist.vertices, dist.support, vec, dist.q), dist)

    tv_full = tv_of(schedule.uncensored())
    violations, worst_margin, worst_mask = 0, float("inf"), None
    for mask in masks:
        tv_censored = tv_of(schedule.censor(mask).uncensored())
        margin = tv_censored - tv_full
        if margin < worst_margin:
            worst_margin, worst_mask = margin, tuple(bool(m) for m in mask)
        if margin < -tol:
            violations += 1
    report = CensoringReport(len(masks), violations, tv_full, worst_margin, worst_mask)
    logger.info(f"Censoring check: {report.masks_checked} masks, {report.violations} violations")
    return report
