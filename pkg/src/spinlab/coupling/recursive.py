"""
Recursive couplings of two conditional Gibbs distributions.

To couple ``mu^{v<-a}`` with ``mu^{v<-b}`` the vertex ``v`` is split into one
copy per free neighbor ``u_1 < .. < u_d`` (vertex order).  In the ``i``-th
intermediate system the copies attached to ``u_1 .. u_i`` show ``b`` and the
rest show ``a``; consecutive systems differ only in what ``u_i`` sees.  Each
link is coupled by maximally coupling the two marginals of ``u_i``: equal
values keep the configuration, different values recurse with ``u_i`` as the
new split vertex.

The couplings are built as kernels: given ``X ~ mu^{v<-a}`` they return
``Y ~ mu^{v<-b}``.  Chaining the links therefore needs no gluing step.
"""
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np

from ..core.exceptions import ConsistencyError, DepthCapError, DomainError, InfeasibleError
from ..core.graph import is_triangle_free
from ..core.system import (
    SPIN_MINUS,
    SPIN_PLUS,
    HammingWeight,
    SpinSystem,
    condition,
    hamming_distance,
    split_vertex,
)
from ..dynamics.rng import RandomStream
from ..oracle.exact import ExactDistribution, get_oracle
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class CouplingSample:
    x: Tuple[int, ...]
    y: Tuple[int, ...]
    discrepancy: FrozenSet[int]
    cost: int

    @classmethod
    def from_pair(cls, x: np.ndarray, y: np.ndarray, rho: Optional[HammingWeight] = None) -> "CouplingSample":
        x = tuple(int(c) for c in x)
        y = tuple(int(c) for c in y)
        rho = rho or HammingWeight.unit(len(x))
        differ = frozenset(v for v in range(len(x)) if x[v] != y[v])
        return cls(x, y, differ, hamming_distance(rho, x, y))

    def check(self, rho: HammingWeight) -> None:
        if self.discrepancy != frozenset(v for v in range(len(self.x)) if self.x[v] != self.y[v]):
            raise ConsistencyError("discrepancy set does not match the pair")
        if self.cost != hamming_distance(rho, self.x, self.y):
            raise ConsistencyError("cost does not match the weighted Hamming distance")


# Maximal couplings


def maximal_coupling_plan(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Joint law with the common mass on the diagonal and residuals matched in index order."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError("distributions have different sizes")
    p, q = p / p.sum(), q / q.sum()
    common = np.minimum(p, q)
    plan = np.diag(common)
    rest_p, rest_q = p - common, q - common
    i = j = 0
    while i < len(p) and j < len(q):
        if rest_p[i] <= 1e-15:
            i += 1
            continue
        if rest_q[j] <= 1e-15:
            j += 1
            continue
        moved = min(rest_p[i], rest_q[j])
        plan[i, j] += moved
        rest_p[i] -= moved
        rest_q[j] -= moved
    return plan


def maximal_coupling(p: np.ndarray, q: np.ndarray, stream: RandomStream) -> Tuple[int, int]:
    """One draw ``(a, b)`` from the maximal coupling, using a single uniform."""
    plan = maximal_coupling_plan(p, q)
    cum = np.cumsum(plan.ravel())
    cell = int(np.searchsorted(cum, stream.random() * cum[-1], side="right"))
    return divmod(min(cell, plan.size - 1), plan.shape[1])


def couple_given(p: np.ndarray, q: np.ndarray, a: int, u: float) -> int:
    """Second coordinate of the maximal coupling given the first is ``a``."""
    row = maximal_coupling_plan(p, q)[a]
    if row.sum() <= 0:
        raise ConsistencyError("conditioning on a zero-probability spin", {"spin": a})
    cum = np.cumsum(row)
    return int(min(np.searchsorted(cum, u * cum[-1], side="right"), len(row) - 1))


# Recursive kernel


def _marginal(system: SpinSystem, u: int) -> np.ndarray:
    try:
        return get_oracle().vertex_marginal(system, u)
    except InfeasibleError as e:
        raise ConsistencyError(f"coupling reached an infeasible conditional: {e}") from e


_split_cache: "OrderedDict[tuple, SpinSystem]" = OrderedDict()


def _split(system: SpinSystem, v: int, shown: Mapping[int, int], a: int) -> SpinSystem:
    """Cached ``split_vertex`` so repeated couplings share oracle enumerations."""
    key = (system.fingerprint, v, tuple(sorted(shown.items())), a)
    split = _split_cache.get(key)
    if split is None:
        split = split_vertex(system, v, shown, a)
        _split_cache[key] = split
        if len(_split_cache) > get_config().get_int("oracle.cache_size", 4096):
            _split_cache.popitem(last=False)
    return split


def _free_neighbors(system: SpinSystem, v: int) -> List[int]:
    return [u for u in system.graph.ordered_neighbors(v) if not system.is_pinned(u)]


def _couple_kernel(
    system: SpinSystem,
    v: int,
    a: int,
    b: int,
    x: np.ndarray,
    stream: RandomStream,
    depth: int,
    depth_cap: int,
) -> np.ndarray:
    """Map ``x ~ system^{v<-a}`` to ``y ~ system^{v<-b}`` along the split path."""
    if depth > depth_cap:
        raise DepthCapError("recursive coupling deeper than the cap", {"depth_cap": depth_cap})
    y = x.copy()
    if a == b:
        return y
    neighbors = _free_neighbors(system, v)
    shown = {u: a for u in neighbors}
    previous = _split(system, v, shown, a)
    for u in neighbors:
        shown[u] = b
        current = _split(system, v, shown, a)
        c = int(y[u])
        c_next = couple_given(_marginal(previous, u), _marginal(current, u), c, 1.0 - stream.random())
        if c_next != c:
            y = _couple_kernel(current, u, c, c_next, y, stream, depth + 1, depth_cap)
        previous = current
    y[v] = b
    return y


def _check_pair(system: SpinSystem, v: int, a: int, b: int) -> SpinSystem:
    if not 0 <= v < system.n:
        raise DomainError("vertex out of range", {"vertex": v})
    if system.is_pinned(v):
        raise ConsistencyError("the coupled vertex must be free", {"vertex": v})
    for c in (a, b):
        if c not in system.domain[v]:
            raise DomainError("spin outside the vertex domain", {"vertex": v, "spin": c})
    return system


def _conditional(system: SpinSystem, v: int, c: int) -> ExactDistribution:
    try:
        return get_oracle().enumerate(condition(system, {v: c}))
    except InfeasibleError:
        logger.error(f"Conditional with vertex {v} set to {c} is infeasible")
        raise


def _start(system: SpinSystem, v: int, a: int, stream: RandomStream) -> np.ndarray:
    return _conditional(system, v, a).sample(stream, 1)[0].astype(np.int64)


def recursive_coupling(
    system: SpinSystem,
    pinning: Mapping[int, int],
    v: int,
    a: int,
    b: int,
    stream: RandomStream,
    rho: Optional[HammingWeight] = None,
) -> CouplingSample:
    """``X ~ mu^{pinning, v<-a}`` drawn exactly, ``Y`` from the recursive kernel."""
    conditioned = _check_pair(condition(system, pinning), v, a, b)
    depth_cap = max(system.n, get_config().get_int("coupling.depth_cap", 64))
    _conditional(conditioned, v, b)
    x = _start(conditioned, v, a, stream)
    y = _couple_kernel(conditioned, v, a, b, x, stream, 0, depth_cap)
    return CouplingSample.from_pair(x, y, rho)


def recursive_coupling_two_spin(
    system: SpinSystem,
    pinning: Mapping[int, int],
    v: int,
    stream: RandomStream,
    rho: Optional[HammingWeight] = None,
) -> CouplingSample:
    """Coupling of ``mu^{pinning, v<-}`` (``x``) and ``mu^{pinning, v<+}`` (``y``)."""
    if system.q != 2:
        raise DomainError("two-spin coupling needs q = 2", {"q": system.q})
    return recursive_coupling(system, pinning, v, SPIN_MINUS, SPIN_PLUS, stream, rho)


def is_list_coloring(system: SpinSystem) -> bool:
    return bool(
        system.interaction.size == 0
        or np.all(system.interaction == (1.0 - np.eye(system.q))[None, :, :])
    )


def recursive_coupling_coloring(
    system: SpinSystem,
    pinning: Mapping[int, int],
    v: int,
    a: int,
    b: int,
    stream: RandomStream,
    rho: Optional[HammingWeight] = None,
) -> CouplingSample:
    """Coupling of two list-coloring conditionals differing in the color of ``v``."""
    if not is_list_coloring(system):
        raise ConsistencyError("coloring coupling needs a list-coloring system")
    if not is_triangle_free(system.graph):
        raise ConsistencyError("coloring coupling needs a triangle-free graph")
    return recursive_coupling(system, pinning, v, a, b, stream, rho)


def independent_coupling(
    system: SpinSystem,
    pinning: Mapping[int, int],
    v: int,
    a: int,
    b: int,
    stream: RandomStream,
    rho: Optional[HammingWeight] = None,
) -> CouplingSample:
    """Product coupling: both sides drawn independently."""
    conditioned = _check_pair(condition(system, pinning), v, a, b)
    x = _start(conditioned, v, a, stream)
    y = _start(conditioned, v, b, stream)
    return CouplingSample.from_pair(x, y, rho)


def swapped_coupling(
    system: SpinSystem,
    pinning: Mapping[int, int],
    v: int,
    a: int,
    b: int,
    stream: RandomStream,
    rho: Optional[HammingWeight] = None,
) -> CouplingSample:
    """Fault injection: the recursive coupling with its two sides exchanged."""
    sample = recursive_coupling(system, pinning, v, a, b, stream, rho)
    return CouplingSample(sample.y, sample.x, sample.discrepancy, sample.cost)


Coupler = Callable[..., CouplingSample]

COUPLERS: Dict[str, Coupler] = {
    "two-spin": recursive_coupling,
    "coloring": recursive_coupling_coloring,
    "independent": independent_coupling,
    "swapped": swapped_coupling,
}


def get_coupler(name: str) -> Coupler:
    try:
        return COUPLERS[name]
    except KeyError:
        raise DomainError(f"Unknown coupling: {name}", {"known": sorted(COUPLERS)}) from None


def sample_coupling(
    coupler: Coupler,
    system: SpinSystem,
    pinning: Mapping[int, int],
    v: int,
    a: int,
    b: int,
    count: int,
    stream: RandomStream,
) -> Tuple[np.ndarray, np.ndarray]:
    """``count`` coupled pairs; pair ``s`` draws from ``stream.child(s)``."""
    if count < 1:
        raise DomainError("sample count must be positive", {"count": count})
    xs = np.empty((count, system.n), dtype=np.int64)
    ys = np.empty((count, system.n), dtype=np.int64)
    for s in range(count):
        sample = coupler(system, pinning, v, a, b, stream.child(s))
        xs[s], ys[s] = sample.x, sample.y
    return xs, ys
