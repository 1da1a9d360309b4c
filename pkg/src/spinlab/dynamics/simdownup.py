"""
Recursive down-up sampler.

``SimDownUp(X, U_R)`` either runs Glauber dynamics on the system conditioned
on ``X`` over ``U_R`` (once ``|R|`` reaches the base level) or repeats ``T1``
times: pick ``i`` outside ``R`` uniformly and recurse on ``R + {i}``, keeping
the recursive result on ``V \\ U_{R + {i}}``.

The batch engine runs many replicas in lockstep.  Every replica carries its
own chosen-block mask; the recursion path determines the child streams:
iteration ``t`` of a level uses ``stream.child(t)`` for the block choice and
``stream.child(t).child(0)`` for everything below it.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .glauber import glauber_batch
from .rng import RandomStream
from .state import ChainState
from ..core.exceptions import ConsistencyError, DomainError
from ..core.system import PartialConfig, SpinSystem
from ..oracle.exact import enumerate_gibbs
from ..oracle.matrices import TransitionMatrix, heat_bath_matrix
from ..partition.partition import Partition, partition_parameters
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SimDownUpParams:
    T0: int
    T1: int
    base_level: int
    M: int
    eta: float
    k: int

    def __post_init__(self) -> None:
        if self.T0 < 1 or self.T1 < 1:
            raise DomainError("T0 and T1 must be at least 1", {"T0": self.T0, "T1": self.T1})
        if not 0 <= self.base_level < self.k:
            raise DomainError("base level must lie in [0, k)", {"base_level": self.base_level, "k": self.k})

    @property
    def glauber_steps(self) -> int:
        """Glauber steps behind one top-level call."""
        return self.T0 * self.T1 ** self.base_level

    def to_dict(self) -> Dict[str, object]:
        return {
            "T0": self.T0,
            "T1": self.T1,
            "base_level": self.base_level,
            "M": self.M,
            "eta": self.eta,
            "k": self.k,
        }


def set_simdownup_schedule(
    t_mix_eta: int,
    n: int,
    epsilon: float,
    M: int,
    eta: float,
    c: Optional[float] = None,
    k: Optional[int] = None,
) -> SimDownUpParams:
    """``T1 = ceil(C L)`` and ``T0 = t_mix_eta * T1`` with ``C = c M / eta``, ``L = max(1, log(n / epsilon))``.

    ``T0`` rounds ``C L`` up before scaling, so it is never below
    ``ceil(t_mix_eta C L)`` and it doubles exactly when ``t_mix_eta`` doubles.

    ``k`` defaults to ``ceil(4 ceil(M) / eta)``; the base level is ``k - 2M``.
    """
    if t_mix_eta < 1 or n < 1 or M < 1:
        raise DomainError("t_mix_eta, n and M must be positive", {"t_mix_eta": t_mix_eta, "n": n, "M": M})
    if epsilon <= 0 or eta <= 0:
        raise DomainError("epsilon and eta must be positive", {"epsilon": epsilon, "eta": eta})
    c = c if c is not None else get_config().get_float("dynamics.c_const", 4.0)
    k = k if k is not None else partition_parameters(M, eta).k
    C = c * M / eta
    L = max(1.0, math.log(n / epsilon))
    T1 = max(1, math.ceil(C * L - 1e-12))
    T0 = int(t_mix_eta) * T1
    base_level = k - 2 * M
    if base_level < 0:
        raise DomainError("k must be at least 2M", {"k": k, "M": M})
    params = SimDownUpParams(T0, T1, base_level, M, eta, k)
    logger.info(f"SimDownUp schedule: {params.to_dict()}")
    return params


@dataclass
class UpdateSchedule:
    """Ordered single-site update records with a censor flag each."""

    records: List[Tuple[int, Tuple[int, ...]]] = field(default_factory=list)
    censored: List[bool] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.censored:
            self.censored = [False] * len(self.records)
        if len(self.censored) != len(self.records):
            raise ConsistencyError("one censor flag per record is required")

    def __len__(self) -> int:
        return len(self.records)

    def append(self, vertex: int, tag: Tuple[int, ...], censored: bool = False) -> None:
        self.records.append((int(vertex), tuple(tag)))
        self.censored.append(bool(censored))

    @property
    def vertices(self) -> List[int]:
        return [v for v, _ in self.records]

    def uncensored(self) -> List[int]:
        return [v for (v, _), c in zip(self.records, self.censored) if not c]

    def censor(self, mask: Sequence[bool]) -> "UpdateSchedule":
        """Schedule with the flagged records censored in addition to the current ones."""
        if len(mask) != len(self.records):
            raise ConsistencyError("mask length must match the schedule")
        flags = [bool(a) or bool(b) for a, b in zip(self.censored, mask)]
        return UpdateSchedule(list(self.records), flags)

    def to_dict(self) -> Dict[str, object]:
        return {
            "records": [[v, list(tag)] for v, tag in self.records],
            "censored": list(self.censored),
        }


def _allowed_mask(assignment: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    """``R x n``: vertex lies outside every chosen block of its replica."""
    inside = np.zeros((len(chosen), len(assignment)), dtype=bool)
    covered = assignment >= 0
    inside[:, covered] = chosen[:, assignment[covered]]
    return ~inside


def _recurse(
    system: SpinSystem,
    assignment: np.ndarray,
    configs: np.ndarray,
    chosen: np.ndarray,
    level: int,
    params: SimDownUpParams,
    stream: RandomStream,
    schedule: Optional[UpdateSchedule],
) -> None:
    if level >= params.base_level:
        record: Optional[List[np.ndarray]] = [] if schedule is not None else None
        glauber_batch(system, configs, params.T0, stream, _allowed_mask(assignment, chosen), record)
        if schedule is not None:
            for t, vertices in enumerate(record):
                if vertices[0] >= 0:
                    schedule.append(int(vertices[0]), stream.path + (t,))
        return
    remaining = params.k - level
    rows = np.arange(len(configs))
    for t in range(params.T1):
        s = stream.child(t)
        u = s.random(len(configs))
        idx = np.minimum((u * remaining).astype(np.int64), remaining - 1)
        free_cumsum = np.cumsum(~chosen, axis=1)
        picks = np.argmax(free_cumsum > idx[:, None], axis=1)
        child_chosen = chosen.copy()
        child_chosen[rows, picks] = True
        _recurse(system, assignment, configs, child_chosen, level + 1, params, s.child(0), schedule)


def _check_partition(system: SpinSystem, p: Partition, params: SimDownUpParams) -> np.ndarray:
    if p.k != params.k:
        raise ConsistencyError("partition and schedule disagree on k", {"partition": p.k, "schedule": params.k})
    return p.assignment_array(system.n)


def _check_level(R: Sequence[int], params: SimDownUpParams) -> List[int]:
    indices = sorted(set(int(i) for i in R))
    if any(not 0 <= i < params.k for i in indices):
        raise DomainError("block index out of range", {"R": indices, "k": params.k})
    if len(indices) > params.base_level:
        raise DomainError("|R| exceeds the base level", {"R": indices, "base_level": params.base_level})
    return indices


def sim_down_up_batch(
    system: SpinSystem,
    p: Partition,
    configs: np.ndarray,
    R: Sequence[int],
    params: SimDownUpParams,
    stream: RandomStream,
) -> np.ndarray:
    """Run ``SimDownUp(X_r, U_R)`` for every row ``X_r`` of ``configs`` (in place)."""
    assignment = _check_partition(system, p, params)
    R = _check_level(R, params)
    chosen = np.zeros((len(configs), p.k), dtype=bool)
    chosen[:, R] = True
    _recurse(system, assignment, configs, chosen, len(R), params, stream, None)
    return configs


def sim_down_up(
    system: SpinSystem,
    p: Partition,
    X: ChainState,
    R: Sequence[int],
    params: SimDownUpParams,
    stream: RandomStream,
    record: bool = False,
) -> Tuple[PartialConfig, Optional[UpdateSchedule]]:
    """Single-replica ``SimDownUp``; returns the configuration on ``V \\ U_R``.

    With ``record=True`` also returns the flattened sequence of Glauber
    updates the call performed.
    """
    assignment = _check_partition(system, p, params)
    R = _check_level(R, params)
    configs = X.as_array()[None, :].copy()
    chosen = np.zeros((1, p.k), dtype=bool)
    chosen[:, R] = True
    schedule = UpdateSchedule() if record else None
    _recurse(system, assignment, configs, chosen, len(R), params, stream, schedule)
    outside = [v for v in range(system.n) if v not in p.union(R)]
    return PartialConfig.from_config(configs[0], outside), schedule


def sim_down_up_matrix(system: SpinSystem, p: Partition, params: SimDownUpParams) -> TransitionMatrix:
    """Exact kernel of ``SimDownUp(X, U_{empty})`` as a matrix on the support.

    At the base level the kernel is ``G_R^T0`` with ``G_R`` the Glauber chain
    that picks uniformly outside ``U_R``; above it the kernel is
    ``(mean_i K_{R + {i}})^T1``.
    """
    _check_partition(system, p, params)
    dist = enumerate_gibbs(system)
    cache: Dict[FrozenSet[int], np.ndarray] = {}

    def kernel(R: FrozenSet[int]) -> np.ndarray:
        if R in cache:
            return cache[R]
        if len(R) >= params.base_level:
            outside = [frozenset({v}) for v in range(system.n) if v not in p.union(R)]
            if outside:
                step = heat_bath_matrix(dist, outside)
                result = np.linalg.matrix_power(step, params.T0)
            else:
                result = np.eye(dist.size)
        else:
            children = [kernel(R | {i}) for i in range(p.k) if i not in R]
            result = np.linalg.matrix_power(sum(children) / len(children), params.T1)
        cache[R] = result
        return result

    P = kernel(frozenset())
    return TransitionMatrix(dist.support, P, dist, "simdownup")
