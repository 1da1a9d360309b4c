"""
Brute-force Gibbs distributions on small instances.

``ExactOracle`` enumerates the support of a (conditioned) spin system in log
space and caches results by ``SpinSystem.fingerprint``; the module-level
helpers use one shared oracle.
"""
import csv
import math
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from ..core.exceptions import DomainError, InfeasibleError, StateCapError
from ..core.system import SpinSystem, config_from_string, config_to_string
from ..dynamics.rng import RandomStream
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

CHUNK_ROWS = 1 << 20


def spin_dtype(q: int) -> np.dtype:
    return np.dtype(np.int8) if q <= 127 else np.dtype(np.int16)


class StateIndex:
    """Row lookup for a fixed set of configurations."""

    def __init__(self, rows: np.ndarray, q: int):
        self.q = q
        self.width = rows.shape[1]
        self._compact = q ** self.width < 2 ** 62
        if self._compact:
            self._radix = q ** np.arange(self.width, dtype=np.int64)
            codes = self.encode(rows)
            self._order = np.argsort(codes, kind="stable")
            self._sorted = codes[self._order]
        else:
            self._table = {bytes(row.astype(np.int16).tobytes()): i for i, row in enumerate(rows)}

    def encode(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=np.int64).reshape(-1, self.width) @ self._radix

    def lookup(self, rows: np.ndarray) -> np.ndarray:
        """Index of each row, ``-1`` when absent."""
        rows = np.asarray(rows).reshape(-1, self.width)
        if not self._compact:
            return np.array(
                [self._table.get(bytes(r.astype(np.int16).tobytes()), -1) for r in rows], dtype=np.int64
            )
        if self._sorted.size == 0:
            return np.full(len(rows), -1, dtype=np.int64)
        codes = self.encode(rows)
        pos = np.clip(np.searchsorted(self._sorted, codes), 0, len(self._sorted) - 1)
        return np.where(self._sorted[pos] == codes, self._order[pos], -1)


def group_rows(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Group identical rows: (inverse labels, index of each group's first row)."""
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if rows.shape[1] == 0:
        return np.zeros(len(rows), dtype=np.int64), np.zeros(1, dtype=np.int64)
    _, first, inverse = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    return np.asarray(inverse).reshape(-1), np.asarray(first)


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """Distribution over configurations of ``vertices`` with explicit support."""

    vertices: Tuple[int, ...]
    support: np.ndarray
    prob: np.ndarray
    q: int

    @property
    def size(self) -> int:
        return len(self.prob)

    @cached_property
    def index(self) -> StateIndex:
        return StateIndex(self.support, self.q)

    @cached_property
    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(self.prob)
        cum[-1] = 1.0
        return cum

    def column(self, v: int) -> int:
        try:
            return self.vertices.index(v)
        except ValueError as e:
            raise DomainError("vertex not covered by this distribution", {"vertex": v}) from e

    def probability_of(self, config: Sequence[int]) -> float:
        i = int(self.index.lookup(np.asarray(config))[0])
        return float(self.prob[i]) if i >= 0 else 0.0

    def as_dict(self) -> Dict[Tuple[int, ...], float]:
        return {tuple(int(c) for c in row): float(p) for row, p in zip(self.support, self.prob)}

    def expectation(self, f: Union[Callable[[np.ndarray], float], np.ndarray]) -> float:
        values = self._values(f)
        return float(values @ self.prob)

    def variance(self, f: Union[Callable[[np.ndarray], float], np.ndarray]) -> float:
        values = self._values(f)
        mean = values @ self.prob
        return float(((values - mean) ** 2) @ self.prob)

    def _values(self, f: Union[Callable[[np.ndarray], float], np.ndarray]) -> np.ndarray:
        if callable(f):
            return np.array([f(row) for row in self.support], dtype=float)
        values = np.asarray(f, dtype=float)
        if values.shape != self.prob.shape:
            raise DomainError("function values must align with the support")
        return values

    def marginal_of(self, vertex: int) -> np.ndarray:
        """Single-vertex marginal as a length-q vector."""
        col = self.support[:, self.column(vertex)].astype(np.int64)
        return np.bincount(col, weights=self.prob, minlength=self.q)

    def project(self, vertices: Sequence[int]) -> "ExactDistribution":
        cols = [self.column(v) for v in vertices]
        rows = self.support[:, cols]
        inverse, first = group_rows(rows)
        mass = np.bincount(inverse, weights=self.prob, minlength=len(first))
        return ExactDistribution(tuple(vertices), rows[first], mass, self.q)

    def sample(self, stream: RandomStream, size: int) -> np.ndarray:
        """``size x len(vertices)`` i.i.d. draws."""
        picks = np.searchsorted(self.cumulative, stream.random(size), side="right")
        return self.support[np.minimum(picks, self.size - 1)]

    def validate(self, tol: Optional[float] = None) -> None:
        tol = tol if tol is not None else get_config().get_float("oracle.identity_tol", 1e-12)
        if np.any(self.prob < 0):
            raise DomainError("negative probability")
        if abs(self.prob.sum() - 1.0) > tol * max(1, self.size):
            raise DomainError("probabilities do not sum to one", {"sum": float(self.prob.sum())})
        _, first = group_rows(self.support)
        if len(first) != self.size:
            raise DomainError("support entries are not distinct")

    @classmethod
    def from_samples(cls, samples: np.ndarray, vertices: Sequence[int], q: int) -> "ExactDistribution":
        samples = np.asarray(samples)
        if len(samples) == 0:
            raise DomainError("no samples")
        samples = samples.reshape(len(samples), -1)
        inverse, first = group_rows(samples)
        counts = np.bincount(inverse, minlength=len(first))
        return cls(tuple(vertices), samples[first].astype(spin_dtype(q)), counts / counts.sum(), q)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["state", "prob"])
            for row, p in zip(self.support, self.prob):
                writer.writerow([config_to_string(row, self.q), f"{p:.17g}"])

    @classmethod
    def from_csv(cls, path: Union[str, Path], vertices: Sequence[int], q: int) -> "ExactDistribution":
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            rows, probs = [], []
            for record in reader:
                rows.append(config_from_string(record["state"], q))
                probs.append(float(record["prob"]))
        return cls(tuple(vertices), np.array(rows, dtype=spin_dtype(q)), np.array(probs), q)

    def to_json(self) -> Dict[str, object]:
        return {
            "vertices": list(self.vertices),
            "q": self.q,
            "states": [config_to_string(row, self.q) for row in self.support],
            "prob": [float(p) for p in self.prob],
        }


class ExactOracle:
    """Enumerates Gibbs distributions, with an LRU cache keyed by fingerprint."""

    def __init__(self, state_cap: Optional[int] = None, cache_size: Optional[int] = None):
        config = get_config()
        self.state_cap = state_cap or config.get_int("oracle.state_cap", 1 << 24)
        self.cache_size = cache_size or config.get_int("oracle.cache_size", 4096)
        self._cache: "OrderedDict[str, ExactDistribution]" = OrderedDict()
        self._log_z: Dict[str, float] = {}
        self._vertex_marginals: Dict[Tuple[str, int], np.ndarray] = {}

    def clear(self) -> None:
        self._cache.clear()
        self._log_z.clear()
        self._vertex_marginals.clear()

    def enumerate(self, system: SpinSystem) -> ExactDistribution:
        key = system.fingerprint
        cached = self._cache.get(key)
        if cached is not None:
            self._cache.move_to_end(key)
            return cached
        dist, log_z = self._enumerate(system)
        self._cache[key] = dist
        self._log_z[key] = log_z
        if len(self._cache) > self.cache_size:
            old, _ = self._cache.popitem(last=False)
            self._log_z.pop(old, None)
        return dist

    def _enumerate(self, system: SpinSystem) -> Tuple[ExactDistribution, float]:
        if not math.isfinite(system.pinned_log_factor):
            raise InfeasibleError("pinning has zero weight", {"pinned": len(system.pinning)})
        free = np.asarray(system.free_vertices, dtype=np.int64)
        domains = [np.array(sorted(system.domain[v]), dtype=np.int64) for v in free]
        total = math.prod(len(d) for d in domains)
        if total > self.state_cap:
            raise StateCapError(
                "enumeration exceeds the state cap", {"states": total, "cap": self.state_cap}
            )
        logger.debug(f"Enumerating {total} configurations of {len(free)} free vertices")

        dtype = spin_dtype(system.q)
        if len(free):
            grids = np.meshgrid(*domains, indexing="ij")
            free_rows = np.stack([g.ravel() for g in grids], axis=1)
        else:
            free_rows = np.zeros((1, 0), dtype=np.int64)
        configs = np.empty((len(free_rows), system.n), dtype=dtype)
        for v, c in system.pinning.items():
            configs[:, v] = c
        configs[:, free] = free_rows

        log_w = np.empty(len(configs))
        us, vs, mats = system.free_edges
        edge_ids = np.arange(len(us))
        with np.errstate(divide="ignore"):
            log_field = np.log(system.field)
            log_mats = np.log(mats)
            for start in range(0, len(configs), CHUNK_ROWS):
                block = configs[start : start + CHUNK_ROWS].astype(np.int64)
                part = log_field[free, block[:, free]].sum(axis=1) if len(free) else np.zeros(len(block))
                if len(us):
                    part = part + log_mats[edge_ids, block[:, us], block[:, vs]].sum(axis=1)
                log_w[start : start + len(block)] = part

        keep = np.isfinite(log_w)
        if not keep.any():
            raise InfeasibleError(
                "total weight is zero", {"free_vertices": len(free), "pinned": len(system.pinning)}
            )
        log_w = log_w[keep]
        log_z = float(logsumexp(log_w))
        prob = np.exp(log_w - log_z)
        prob /= prob.sum()
        dist = ExactDistribution(tuple(range(system.n)), configs[keep], prob, system.q)
        return dist, log_z

    def log_partition_function(self, system: SpinSystem) -> float:
        """Log of the total weight, pinning-only factors included."""
        self.enumerate(system)
        return self._log_z[system.fingerprint] + system.pinned_log_factor

    def marginal(self, system: SpinSystem, vertices: Iterable[int]) -> ExactDistribution:
        return self.enumerate(system).project(list(vertices))

    def vertex_marginal(self, system: SpinSystem, v: int) -> np.ndarray:
        if system.is_pinned(v):
            out = np.zeros(system.q)
            out[system.pinning[v]] = 1.0
            return out
        key = (system.fingerprint, v)
        cached = self._vertex_marginals.get(key)
        if cached is None:
            cached = self.enumerate(system).marginal_of(v)
            cached.setflags(write=False)
            self._vertex_marginals[key] = cached
        return cached

    def sample(self, system: SpinSystem, stream: RandomStream, size: int = 1) -> np.ndarray:
        return self.enumerate(system).sample(stream, size)


_default_oracle: Optional[ExactOracle] = None


def get_oracle() -> ExactOracle:
    global _default_oracle
    if _default_oracle is None:
        _default_oracle = ExactOracle()
    return _default_oracle


def reset_oracle() -> ExactOracle:
    global _default_oracle
    _default_oracle = ExactOracle()
    return _default_oracle


def enumerate_gibbs(system: SpinSystem) -> ExactDistribution:
    """The Gibbs distribution of ``system`` by exhaustive enumeration."""
    return get_oracle().enumerate(system)


def exact_marginal(system: SpinSystem, vertices: Iterable[int]) -> ExactDistribution:
    return get_oracle().marginal(system, vertices)


def vertex_marginal(system: SpinSystem, v: int) -> np.ndarray:
    return get_oracle().vertex_marginal(system, v)


def partition_function(system: SpinSystem) -> float:
    return math.exp(get_oracle().log_partition_function(system))


def log_partition_function(system: SpinSystem) -> float:
    return get_oracle().log_partition_function(system)


def is_feasible(system: SpinSystem) -> bool:
    try:
        get_oracle().enumerate(system)
    except InfeasibleError:
        return False
    return True


def _aligned(nu: ExactDistribution, mu: ExactDistribution) -> Tuple[np.ndarray, float]:
    """``nu`` re-expressed on ``mu``'s support, plus its mass outside it."""
    if nu.vertices != mu.vertices:
        raise DomainError("distributions are over different vertex sets")
    idx = mu.index.lookup(nu.support)
    inside = idx >= 0
    on_mu = np.zeros(mu.size)
    np.add.at(on_mu, idx[inside], nu.prob[inside])
    return on_mu, float(nu.prob[~inside].sum())


def divergence(kind: str, nu: ExactDistribution, mu: ExactDistribution) -> float:
    """TV, chi-square or KL divergence of ``nu`` from ``mu``."""
    on_mu, outside = _aligned(nu, mu)
    kind = kind.lower()
    if kind == "tv":
        return 0.5 * (float(np.abs(on_mu - mu.prob).sum()) + outside)
    if outside > 0:
        raise DomainError(f"{kind} needs nu absolutely continuous with respect to mu", {"outside_mass": outside})
    if kind in ("chi2", "chi-square"):
        return max(float((on_mu ** 2 / mu.prob).sum()) - 1.0, 0.0)
    if kind == "kl":
        positive = on_mu > 0
        return max(float((on_mu[positive] * np.log(on_mu[positive] / mu.prob[positive])).sum()), 0.0)
    raise DomainError(f"Unknown divergence: {kind}")


def tv_estimation_bias(support_size: int, samples: int) -> float:
    """Upper bound ``sqrt(K / (4N))`` on the expected TV of an empirical distribution."""
    if samples <= 0:
        raise DomainError("sample count must be positive")
    return math.sqrt(support_size / (4.0 * samples))
