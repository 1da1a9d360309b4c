"""
Down-up walks over a partition and their exact analysis.

In the ``resample_complement`` convention (the default) a step keeps the
blocks of a uniform ``ell``-subset ``R`` and redraws ``V \\ U_R`` from its
conditional distribution.  In the ``resample_block`` convention the chosen
blocks themselves are redrawn.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from .rng import RandomStream
from .state import ChainState
from ..core.exceptions import DomainError, InfeasibleError
from ..core.system import HammingWeight, SpinSystem, condition
from ..oracle.exact import ExactDistribution, enumerate_gibbs, get_oracle
from ..oracle.matrices import (
    RESAMPLE_BLOCK,
    RESAMPLE_COMPLEMENT,
    TransitionMatrix,
    block_matrix,
    pinned_relaxation_time,
    glauber_matrix,
    relaxation_time,
)
from ..oracle.transport import wasserstein_hamming
from ..partition.partition import Partition
from ..utils.logger import get_logger

logger = get_logger(__name__)

NestedSampler = Callable[[SpinSystem, np.ndarray, RandomStream], np.ndarray]


def _resampled_set(system: SpinSystem, p: Partition, R: Iterable[int], mode: str) -> List[int]:
    chosen = p.union(R)
    if mode == RESAMPLE_BLOCK:
        target = chosen
    elif mode == RESAMPLE_COMPLEMENT:
        target = frozenset(range(system.n)) - chosen
    else:
        raise DomainError(f"Unknown block convention: {mode}")
    return sorted(v for v in target if not system.is_pinned(v))


def resample_vertices(
    system: SpinSystem,
    config: np.ndarray,
    resampled: Sequence[int],
    stream: RandomStream,
    nested_sampler: Optional[NestedSampler] = None,
) -> np.ndarray:
    """Redraw ``config`` on ``resampled`` from the conditional given everything else."""
    out = np.array(config, dtype=np.int64)
    if not resampled:
        return out
    keep = set(resampled)
    tau = {v: int(out[v]) for v in system.free_vertices if v not in keep}
    conditioned = condition(system, tau)
    if nested_sampler is not None:
        drawn = np.asarray(nested_sampler(conditioned, out, stream), dtype=np.int64)
    else:
        drawn = get_oracle().sample(conditioned, stream, 1)[0].astype(np.int64)
    out[list(resampled)] = drawn[list(resampled)]
    return out


def down_up_step(
    system: SpinSystem,
    p: Partition,
    ell: int,
    state: ChainState,
    stream: RandomStream,
    mode: str = RESAMPLE_COMPLEMENT,
    nested_sampler: Optional[NestedSampler] = None,
) -> ChainState:
    """One transition of the ``k <-> ell`` walk.

    The up-step samples exactly by enumeration unless a nested sampler is
    supplied; enumeration raises ``StateCapError`` above the oracle cap.
    """
    if not 0 <= ell <= p.k:
        raise DomainError("ell must lie in [0, k]", {"ell": ell, "k": p.k})
    R = sorted(int(i) for i in stream.choice(p.k, size=ell, replace=False))
    resampled = _resampled_set(system, p, R, mode)
    config = resample_vertices(system, state.as_array(), resampled, stream, nested_sampler)
    return state.advance(config)


def _subset_sets(p: Partition, ell: int, R_fixed: Sequence[int]) -> List[frozenset]:
    fixed = set(R_fixed)
    remaining = [i for i in range(p.k) if i not in fixed]
    if not 0 <= ell <= len(remaining):
        raise DomainError("ell exceeds the number of free blocks", {"ell": ell, "free_blocks": len(remaining)})
    return [p.union(tuple(R) + tuple(fixed)) for R in itertools.combinations(remaining, ell)]


def down_up_matrix(
    system: SpinSystem,
    p: Partition,
    ell: int,
    R_fixed: Optional[Sequence[int]] = None,
    mode: str = RESAMPLE_COMPLEMENT,
) -> TransitionMatrix:
    """Exact matrix of the ``k <-> ell`` walk, or of the ``(k - r) <-> ell`` walk.

    With ``R_fixed`` the blocks it names are never redrawn; pass a system
    already conditioned on them to get the walk on ``mu^tau``.
    """
    fixed = list(R_fixed or ())
    sets = _subset_sets(p, ell, fixed)
    if mode == RESAMPLE_BLOCK:
        keep_fixed = p.union(fixed)
        sets = [s - keep_fixed for s in sets]
    matrix = block_matrix(system, sets, mode=mode)
    label = f"downup:k={p.k},ell={ell},fixed={len(fixed)}"
    return TransitionMatrix(matrix.states, matrix.P, matrix.stationary, label)


def _block_pinnings(system: SpinSystem, p: Partition, R: Sequence[int]):
    """Feasible pinnings of the free vertices of ``U_R``."""
    vertices = sorted(v for v in p.union(R) if not system.is_pinned(v))
    if not vertices:
        yield {}
        return
    marginal = enumerate_gibbs(system).project(vertices)
    for row in marginal.support:
        yield dict(zip(vertices, (int(c) for c in row)))


def level_relaxation_times(system: SpinSystem, p: Partition, ell: int) -> List[float]:
    """``gamma_r`` for ``r < ell``: worst relaxation time of the ``(k - r) <-> 1`` walk.

    The maximum runs over every ``R`` of size ``r`` and every feasible
    configuration on ``U_R``.
    """
    gammas = []
    for r in range(ell):
        worst = 0.0
        for R in itertools.combinations(range(p.k), r):
            for tau in _block_pinnings(system, p, R):
                conditioned = condition(system, tau)
                t_rel = relaxation_time(down_up_matrix(conditioned, p, 1, R_fixed=R))
                worst = max(worst, t_rel)
        logger.debug(f"gamma_{r} = {worst:.6g}")
        gammas.append(worst)
    return gammas


@dataclass
class LocalToGlobalReport:
    t_rel: float
    gammas: List[float]
    bound: float

    @property
    def holds(self) -> bool:
        return self.t_rel <= self.bound * (1 + 1e-8) + 1e-8


def local_to_global_bound(system: SpinSystem, p: Partition, ell: int) -> LocalToGlobalReport:
    """Compare ``t_rel(k <-> ell)`` with the product of level relaxation times."""
    t_rel = relaxation_time(down_up_matrix(system, p, ell))
    gammas = level_relaxation_times(system, p, ell)
    bound = math.prod(gammas) if gammas else 1.0
    logger.info(f"Local-to-global: t_rel={t_rel:.6g}, product bound={bound:.6g}")
    return LocalToGlobalReport(t_rel, gammas, bound)


@dataclass
class ComparisonReport:
    t_rel_glauber: float
    t_rel_block: float
    t_rel_pinned: float
    eta: float

    @property
    def bound(self) -> float:
        return self.t_rel_block * self.t_rel_pinned

    @property
    def holds(self) -> bool:
        return self.t_rel_glauber <= self.bound * (1 + 1e-8) + 1e-8


def comparison_bound(system: SpinSystem, p: Partition, ell: int, xi: float) -> ComparisonReport:
    """Glauber relaxation time against block relaxation time times pinned Glauber relaxation time.

    The pinned relaxation time is taken over regions of induced degree at
    most ``eta * Delta`` with ``eta = (1 + xi) (k - ell) / k``.
    """
    if not 0 <= ell <= p.k - 1:
        raise DomainError("ell must lie in [0, k-1]", {"ell": ell, "k": p.k})
    eta = (1.0 + xi) * (p.k - ell) / p.k
    t_glauber = relaxation_time(glauber_matrix(system))
    t_block = relaxation_time(down_up_matrix(system, p, ell))
    pinned = pinned_relaxation_time(system, eta)
    report = ComparisonReport(t_glauber, t_block, pinned.value, eta)
    logger.info(
        f"Comparison: t_rel(GD)={t_glauber:.6g} <= {t_block:.6g} x {pinned.value:.6g} ({report.holds})"
    )
    return report


def _transition_row(matrix: TransitionMatrix, i: int) -> ExactDistribution:
    live = matrix.P[i] > 0
    dist = matrix.stationary
    return ExactDistribution(dist.vertices, dist.support[live], matrix.P[i, live], dist.q)


def path_coupling_contraction(
    system: SpinSystem,
    p: Partition,
    r: int,
    rho: Optional[HammingWeight] = None,
) -> float:
    """Worst ``W_H(P(X, .), P(Y, .)) / H(X, Y)`` over adjacent ``X, Y`` of the ``(k - r) <-> 1`` walk.

    Runs over every ``R`` of size ``r`` and every feasible pinning of ``U_R``.
    Values below one certify contraction of the path coupling.
    """
    if not 0 <= r <= p.k - 1:
        raise DomainError("r must lie in [0, k-1]", {"r": r, "k": p.k})
    rho = rho or HammingWeight.unit(system.n)
    worst = 0.0
    for R in itertools.combinations(range(p.k), r):
        for tau in _block_pinnings(system, p, R):
            conditioned = condition(system, tau)
            matrix = down_up_matrix(conditioned, p, 1, R_fixed=R)
            X = matrix.states.astype(np.int64)
            for i in range(len(X)):
                differs = (X[i + 1 :] != X[i]).sum(axis=1)
                for j in np.flatnonzero(differs == 1) + i + 1:
                    v = int(np.flatnonzero(X[i] != X[j])[0])
                    distance = wasserstein_hamming(_transition_row(matrix, i), _transition_row(matrix, j), rho)
                    worst = max(worst, distance / rho[v])
    logger.info(f"Path-coupling contraction at r={r}: {worst:.6g}")
    return worst


def feasible_start(system: SpinSystem) -> np.ndarray:
    """A deterministic state of positive weight: the first enumerated configuration."""
    dist = enumerate_gibbs(system)
    if dist.size == 0:
        raise InfeasibleError("no feasible configuration")
    return dist.support[0].astype(np.int64)
