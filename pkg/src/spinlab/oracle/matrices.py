"""
Dense transition matrices of heat-bath chains and their spectra.

All matrices live on the support of the exact Gibbs distribution.  Spectra are
computed from the symmetrized form ``D^{1/2} P D^{-1/2}``.
"""
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .exact import ExactDistribution, enumerate_gibbs, get_oracle, group_rows
from ..core.exceptions import DomainError, InfeasibleError, StateCapError
from ..core.system import SPIN_PLUS, SpinSystem, condition
from ..dynamics.rng import RandomStream
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

RESAMPLE_BLOCK = "resample_block"
RESAMPLE_COMPLEMENT = "resample_complement"


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    states: np.ndarray
    P: np.ndarray
    stationary: ExactDistribution
    label: str = ""

    @property
    def size(self) -> int:
        return len(self.P)

    def row_sum_violation(self) -> float:
        return float(np.abs(self.P.sum(axis=1) - 1.0).max())

    def stationarity_violation(self) -> float:
        pi = self.stationary.prob
        return float(np.abs(pi @ self.P - pi).max())

    def detailed_balance_violation(self) -> float:
        flow = self.stationary.prob[:, None] * self.P
        return float(np.abs(flow - flow.T).max())

    @cached_property
    def symmetrized(self) -> np.ndarray:
        root = np.sqrt(self.stationary.prob)
        sym = root[:, None] * self.P / root[None, :]
        return (sym + sym.T) / 2.0

    @cached_property
    def eigen(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues in decreasing order and matching orthonormal eigenvectors."""
        values, vectors = linalg.eigh(self.symmetrized)
        order = np.argsort(values)[::-1]
        return values[order], vectors[:, order]

    def eigenvalues(self) -> np.ndarray:
        return self.eigen[0]

    def power(self, t: int) -> np.ndarray:
        """``P^t`` through the spectral decomposition."""
        values, vectors = self.eigen
        root = np.sqrt(self.stationary.prob)
        scaled = vectors * np.power(values, t)[None, :]
        return (scaled @ vectors.T) / root[:, None] * root[None, :]


@dataclass(frozen=True)
class SpectralSummary:
    lambda2: float
    gap: float
    t_rel: float
    min_eigenvalue: float


def _matrix_cap() -> int:
    return get_config().get_int("oracle.matrix_cap", 4096)


def _check_size(dist: ExactDistribution) -> None:
    cap = _matrix_cap()
    if dist.size > cap:
        raise StateCapError("state space too large for a dense matrix", {"states": dist.size, "cap": cap})


def heat_bath_matrix(
    dist: ExactDistribution,
    blocks: Sequence[Iterable[int]],
    weights: Optional[Sequence[float]] = None,
    mode: str = RESAMPLE_BLOCK,
) -> np.ndarray:
    """Mixture over blocks of heat-bath updates of ``dist``.

    With ``resample_block`` each block is redrawn given everything else; with
    ``resample_complement`` everything outside the block is redrawn given the
    block.
    """
    if mode not in (RESAMPLE_BLOCK, RESAMPLE_COMPLEMENT):
        raise DomainError(f"Unknown block convention: {mode}")
    blocks = [frozenset(b) for b in blocks]
    if not blocks:
        raise DomainError("at least one block is required")
    if weights is None:
        weights = [1.0 / len(blocks)] * len(blocks)
    if len(weights) != len(blocks) or abs(sum(weights) - 1.0) > 1e-12 or min(weights) < 0:
        raise DomainError("block weights must be a probability vector")
    _check_size(dist)

    prob = dist.prob
    P = np.zeros((dist.size, dist.size))
    for block, w in zip(blocks, weights):
        if w == 0:
            continue
        resampled = block if mode == RESAMPLE_BLOCK else frozenset(dist.vertices) - block
        kept = [i for i, v in enumerate(dist.vertices) if v not in resampled]
        labels, first = group_rows(dist.support[:, kept])
        mass = np.bincount(labels, weights=prob, minlength=len(first))
        same = labels[:, None] == labels[None, :]
        P += w * same * (prob[None, :] / mass[labels][:, None])
    return P


def glauber_matrix(system: SpinSystem) -> TransitionMatrix:
    """Single-site heat-bath chain that picks each of the ``n`` vertices uniformly.

    Built from the closed-form single-site conditionals; pinned vertices
    contribute identity updates.
    """
    dist = enumerate_gibbs(system)
    _check_size(dist)
    n, K = system.n, dist.size
    X = dist.support.astype(np.int64)
    rows = np.arange(K)
    P = np.zeros((K, K))
    for v in range(n):
        if system.is_pinned(v):
            P[rows, rows] += 1.0 / n
            continue
        w = np.tile(system.field[v], (K, 1))
        for u in system.graph.neighbors(v):
            if not system.is_pinned(u):
                w *= system.interaction_between(v, u)[:, X[:, u]].T
        totals = w.sum(axis=1)
        w /= totals[:, None]
        for c in range(system.q):
            moving = w[:, c] > 0
            if not moving.any():
                continue
            Y = X[moving].copy()
            Y[:, v] = c
            target = dist.index.lookup(Y)
            if np.any(target < 0):
                raise InfeasibleError("single-site update left the support", {"vertex": v})
            np.add.at(P, (rows[moving], target), w[moving, c] / n)
    return TransitionMatrix(dist.support, P, dist, "glauber")


def block_matrix(
    system: SpinSystem,
    blocks: Sequence[Iterable[int]],
    weights: Optional[Sequence[float]] = None,
    mode: str = RESAMPLE_BLOCK,
) -> TransitionMatrix:
    dist = enumerate_gibbs(system)
    return TransitionMatrix(dist.support, heat_bath_matrix(dist, blocks, weights, mode), dist, f"block:{mode}")


def spectrum(matrix: TransitionMatrix) -> SpectralSummary:
    tol = get_config().get_float("oracle.eigen_tol", 1e-10)
    values = matrix.eigenvalues()
    lambda2 = float(values[1]) if len(values) > 1 else 0.0
    gap = 1.0 - lambda2
    if gap <= tol:
        return SpectralSummary(lambda2, 0.0, math.inf, float(values[-1]))
    return SpectralSummary(lambda2, gap, 1.0 / gap, float(values[-1]))


def spectral_gap(matrix: TransitionMatrix) -> Tuple[float, float]:
    """(gap, relaxation time); the relaxation time is infinite for reducible chains."""
    summary = spectrum(matrix)
    return summary.gap, summary.t_rel


def relaxation_time(matrix: TransitionMatrix) -> float:
    return spectrum(matrix).t_rel


def worst_tv(matrix: TransitionMatrix, t: int, starts: Optional[np.ndarray] = None) -> float:
    Pt = matrix.power(t)
    if starts is not None:
        Pt = Pt[starts]
    return float(0.5 * np.abs(Pt - matrix.stationary.prob[None, :]).sum(axis=1).max())


def tv_curve(matrix: TransitionMatrix, start: int, steps: int) -> List[float]:
    """TV distance to stationarity after ``0..steps`` steps from one state."""
    pi = matrix.stationary.prob
    row = np.zeros(matrix.size)
    row[start] = 1.0
    curve = [0.5 * float(np.abs(row - pi).sum())]
    for _ in range(steps):
        row = row @ matrix.P
        curve.append(0.5 * float(np.abs(row - pi).sum()))
    return curve


def mixing_time(
    matrix: TransitionMatrix,
    epsilon: float,
    starts: Optional[Sequence[int]] = None,
    t_max: Optional[int] = None,
) -> Optional[int]:
    """Smallest ``t >= 1`` with worst-start TV at most ``epsilon``.

    The worst-start distance is nonincreasing in ``t``, so the search doubles
    and then bisects.  Returns ``None`` if ``t_max`` is reached first.
    """
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)", {"epsilon": epsilon})
    t_max = t_max or get_config().get_int("dynamics.mixing_t_max", 100000)
    idx = None if starts is None else np.asarray(list(starts), dtype=np.int64)
    if worst_tv(matrix, 1, idx) <= epsilon:
        return 1
    low, high = 1, 2
    while worst_tv(matrix, high, idx) > epsilon:
        low, high = high, high * 2
        if low >= t_max:
            logger.warning(f"Mixing time exceeds t_max={t_max}")
            return None
    while high - low > 1:
        mid = (low + high) // 2
        if worst_tv(matrix, mid, idx) <= epsilon:
            high = mid
        else:
            low = mid
    return high


@dataclass
class BlockFactorizationReport:
    C: float
    holds: bool
    t_rel: float
    worst_ratio: float
    eigen_ratio: float
    trials: int
    violations: int
    violating_function: Optional[np.ndarray] = field(default=None, repr=False)


def _variance_and_energy(prob: np.ndarray, P: np.ndarray, f: np.ndarray) -> Tuple[float, float]:
    mean = f @ prob
    variance = float(((f - mean) ** 2) @ prob)
    energy = float((prob * f) @ (f - P @ f))
    return variance, energy


def check_block_factorization(
    system: SpinSystem,
    blocks: Sequence[Iterable[int]],
    C: float,
    trials: int,
    stream: RandomStream,
) -> BlockFactorizationReport:
    """Test ``Var[f] <= (C / l) * sum_B mu[Var_B f]`` on random and extremal ``f``.

    ``mu[Var_B f]`` is the Dirichlet form of the heat-bath update of ``B``, so
    the right-hand side is ``C`` times the Dirichlet form of the block chain.
    Gaussian probes cover the bulk; the second eigenvector attains the ratio
    ``t_rel`` exactly.
    """
    matrix = block_matrix(system, blocks)
    prob, P = matrix.stationary.prob, matrix.P
    tol = get_config().get_float("oracle.eigen_tol", 1e-10)

    worst_ratio, worst_f, violations = 0.0, None, 0
    probes = [stream.normal(matrix.size) for _ in range(trials)]
    summary = spectrum(matrix)
    eigen_ratio = summary.t_rel
    if matrix.size > 1:
        phi = matrix.eigen[1][:, 1] / np.sqrt(prob)
        probes.append(phi)
    for f in probes:
        variance, energy = _variance_and_energy(prob, P, f)
        ratio = math.inf if energy <= tol * max(variance, 1.0) else variance / energy
        if variance > C * energy + tol * max(variance, 1.0):
            violations += 1
            if worst_f is None or ratio > worst_ratio:
                worst_f = f
        worst_ratio = max(worst_ratio, ratio if variance > tol else 0.0)

    report = BlockFactorizationReport(
        C=C,
        holds=violations == 0,
        t_rel=summary.t_rel,
        worst_ratio=worst_ratio,
        eigen_ratio=eigen_ratio,
        trials=trials,
        violations=violations,
        violating_function=worst_f,
    )
    logger.info(f"Block factorization C={C}: holds={report.holds}, t_rel={report.t_rel:.6g}")
    return report


def down_walk_matrix(dist: ExactDistribution, kept_sets: Sequence[Iterable[int]]) -> np.ndarray:
    """Channel from configurations to (kept set, projected configuration) pairs."""
    columns = []
    for kept in kept_sets:
        cols = [i for i, v in enumerate(dist.vertices) if v in set(kept)]
        labels, first = group_rows(dist.support[:, cols])
        block = np.zeros((dist.size, len(first)))
        block[np.arange(dist.size), labels] = 1.0
        columns.append(block)
    return np.hstack(columns) / len(kept_sets)


def chi2_contraction_coefficient(dist: ExactDistribution, channel: np.ndarray) -> float:
    """Largest ratio ``chi2(nu K || mu K) / chi2(nu || mu)`` over ``nu``."""
    out = dist.prob @ channel
    live = out > 0
    normalized = np.sqrt(dist.prob)[:, None] * channel[:, live] / np.sqrt(out[live])[None, :]
    singular = linalg.svdvals(normalized)
    return float(singular[1] ** 2) if len(singular) > 1 else 0.0


def down_walk_contraction(system: SpinSystem, blocks: Sequence[Iterable[int]]) -> float:
    """Chi-square decay rate ``1 - coefficient`` of the down walk that forgets a block.

    Equals the spectral gap of the matching ``resample_block`` chain.
    """
    dist = enumerate_gibbs(system)
    _check_size(dist)
    kept = [frozenset(dist.vertices) - frozenset(b) for b in blocks]
    return 1.0 - chi2_contraction_coefficient(dist, down_walk_matrix(dist, kept))


@dataclass
class InfluenceMatrix:
    vertices: Tuple[int, ...]
    psi: np.ndarray
    forced: Tuple[int, ...] = ()

    def entry(self, v: int, u: int) -> float:
        return float(self.psi[self.vertices.index(v), self.vertices.index(u)])


def influence_matrix(system: SpinSystem) -> InfluenceMatrix:
    """``psi[v, u] = P(u=+ | v=+) - P(u=+ | v=-)`` over free vertices.

    Rows of vertices whose spin is deterministic are zero.
    """
    if system.q != 2:
        raise DomainError("influence matrices are defined for two-spin systems", {"q": system.q})
    free = system.free_vertices
    oracle = get_oracle()
    tol = get_config().get_float("oracle.identity_tol", 1e-12)
    psi = np.zeros((len(free), len(free)))
    forced = []
    for i, v in enumerate(free):
        p_plus = oracle.vertex_marginal(system, v)[SPIN_PLUS]
        if p_plus <= tol or p_plus >= 1 - tol:
            forced.append(v)
            continue
        plus = oracle.enumerate(condition(system, {v: SPIN_PLUS}))
        minus = oracle.enumerate(condition(system, {v: 1 - SPIN_PLUS}))
        cols = list(free)
        psi[i] = (plus.support[:, cols] == SPIN_PLUS).T @ plus.prob - (
            minus.support[:, cols] == SPIN_PLUS
        ).T @ minus.prob
    return InfluenceMatrix(tuple(free), psi, tuple(forced))


@dataclass
class PinnedTimeResult:
    value: float
    worst_region: Tuple[int, ...]
    worst_pinning: Tuple[Tuple[int, int], ...]
    visited: int


def _low_degree_pinnings(system: SpinSystem, eta: float):
    """Conditional systems on regions with induced max degree <= eta * Delta."""
    free = system.free_vertices
    bound = eta * system.graph.max_degree
    cap = get_config().get_int("oracle.pinned_time_cap", 20000)
    visited = 0
    for size in range(1, len(free) + 1):
        for region in itertools.combinations(free, size):
            if system.graph.induced_max_degree(region) > bound:
                continue
            outside = [v for v in free if v not in region]
            for values in itertools.product(*[sorted(system.domain[v]) for v in outside]):
                visited += 1
                if visited > cap:
                    raise StateCapError("too many pinned systems", {"cap": cap})
                tau = dict(zip(outside, values))
                yield region, tau, condition(system, tau)


def pinned_relaxation_time(system: SpinSystem, eta: float) -> PinnedTimeResult:
    """Max Glauber relaxation time over low-degree regions and all pinnings outside them."""
    best = PinnedTimeResult(0.0, (), (), 0)
    for region, tau, conditioned in _low_degree_pinnings(system, eta):
        best.visited += 1
        try:
            t_rel = relaxation_time(glauber_matrix(conditioned))
        except InfeasibleError:
            continue
        if t_rel > best.value:
            best.value, best.worst_region, best.worst_pinning = t_rel, region, tuple(sorted(tau.items()))
    return best


def pinned_mixing_time(system: SpinSystem, eta: float, epsilon: float = 1.0 / (4.0 * math.e)) -> PinnedTimeResult:
    best = PinnedTimeResult(0.0, (), (), 0)
    for region, tau, conditioned in _low_degree_pinnings(system, eta):
        best.visited += 1
        try:
            t_mix = mixing_time(glauber_matrix(conditioned), epsilon)
        except InfeasibleError:
            continue
        value = math.inf if t_mix is None else float(t_mix)
        if value > best.value:
            best.value, best.worst_region, best.worst_pinning = value, region, tuple(sorted(tau.items()))
    return best
