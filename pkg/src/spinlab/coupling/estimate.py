"""
Empirical coupling independence and the marginal validity gate.

``estimate_ci`` measures ``E[H_rho(X, Y)] / rho(v)`` for a tested set of
``(pinning, v, a, b)`` cases.  The maximum over that set is only an empirical
lower bound on the worst case over all pinnings.
"""
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import chisquare

from .recursive import get_coupler, sample_coupling
from ..core.exceptions import DomainError, InfeasibleError, StateCapError
from ..core.system import HammingWeight, SpinSystem, condition, hamming_distance_batch
from ..dynamics.rng import RandomStream
from ..oracle.exact import ExactDistribution, enumerate_gibbs, is_feasible
from ..oracle.transport import wasserstein_hamming
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

EMPIRICAL_LOWER_BOUND = "empirical lower bound"


@dataclass(frozen=True)
class CouplingCase:
    pinning: Tuple[Tuple[int, int], ...]
    v: int
    a: int
    b: int

    def to_dict(self) -> Dict[str, Any]:
        return {"pinning": dict(self.pinning), "v": self.v, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class PinningSpec:
    """How ``estimate_ci`` chooses its cases.

    ``all`` enumerates every feasible pinning of at most ``max_pinned``
    vertices; ``random`` restricts Gibbs samples to random vertex subsets;
    ``empty`` uses no pinning at all.
    """

    mode: str = "empty"
    max_pinned: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("all", "random", "empty"):
            raise DomainError(f"Unknown pinning mode: {self.mode}")
        if self.max_pinned < 0:
            raise DomainError("max_pinned must be non-negative")


def _value_pairs(system: SpinSystem, v: int) -> List[Tuple[int, int]]:
    return list(itertools.combinations(sorted(system.domain[v]), 2))


def _usable(system: SpinSystem, pinning: Dict[int, int], v: int, a: int, b: int) -> bool:
    base = condition(system, pinning)
    return is_feasible(condition(base, {v: a})) and is_feasible(condition(base, {v: b}))


def _enumerate_cases(system: SpinSystem, spec: PinningSpec) -> List[CouplingCase]:
    free = system.free_vertices
    cases = []
    for size in range(0, spec.max_pinned + 1 if spec.mode == "all" else 1):
        for region in itertools.combinations(free, size):
            for values in itertools.product(*[sorted(system.domain[u]) for u in region]):
                pinning = dict(zip(region, values))
                for v in free:
                    if v in pinning:
                        continue
                    for a, b in _value_pairs(system, v):
                        if _usable(system, pinning, v, a, b):
                            cases.append(CouplingCase(tuple(sorted(pinning.items())), v, a, b))
    return cases


def _random_cases(system: SpinSystem, spec: PinningSpec, count: int, stream: RandomStream) -> List[CouplingCase]:
    free = np.asarray(system.free_vertices, dtype=np.int64)
    if len(free) == 0:
        raise DomainError("no free vertex to couple")
    dist = enumerate_gibbs(system)
    cases: List[CouplingCase] = []
    attempts = 0
    while len(cases) < count and attempts < 20 * count:
        s = stream.child(attempts)
        attempts += 1
        config = dist.sample(s, 1)[0]
        size = int(s.integers(0, min(spec.max_pinned, len(free) - 1) + 1))
        chosen = s.choice(free, size=size + 1, replace=False)
        v, region = int(chosen[0]), [int(u) for u in chosen[1:]]
        pinning = {u: int(config[u]) for u in region}
        pairs = _value_pairs(system, v)
        if not pairs:
            continue
        a, b = pairs[int(s.integers(0, len(pairs)))]
        if _usable(system, pinning, v, a, b):
            cases.append(CouplingCase(tuple(sorted(pinning.items())), v, a, b))
    return cases


def coupling_cases(system: SpinSystem, spec: PinningSpec, count: int, stream: RandomStream) -> List[CouplingCase]:
    """At most ``count`` cases: the first ones enumerated, or ``count`` random ones."""
    if spec.mode == "random":
        return _random_cases(system, spec, count, stream)
    return _enumerate_cases(system, spec)[:count]


def bernstein_halfwidth(values: np.ndarray, value_range: float, delta: float) -> float:
    """Empirical Bernstein half-width at confidence ``1 - delta``."""
    n = len(values)
    if n < 2:
        return math.inf
    log_term = math.log(2.0 / delta)
    variance = float(np.var(values, ddof=1))
    return math.sqrt(2.0 * variance * log_term / n) + 7.0 * value_range * log_term / (3.0 * (n - 1))


@dataclass
class CaseEstimate:
    case: CouplingCase
    mean: float
    low: float
    high: float
    samples: int
    wasserstein: Optional[float] = None
    disagreement: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        out = self.case.to_dict()
        out.update(
            {
                "mean": self.mean,
                "low": self.low,
                "high": self.high,
                "samples": self.samples,
                "wasserstein": self.wasserstein,
            }
        )
        return out


def estimate_case(
    system: SpinSystem,
    rho: HammingWeight,
    coupling: str,
    case: CouplingCase,
    samples: int,
    stream: RandomStream,
    delta: float = 0.05,
) -> CaseEstimate:
    """Monte Carlo ``E[H_rho] / rho(v)`` for one case, with its exact transport lower bound."""
    pinning = dict(case.pinning)
    xs, ys = sample_coupling(get_coupler(coupling), system, pinning, case.v, case.a, case.b, samples, stream)
    ratios = hamming_distance_batch(rho, xs, ys) / rho[case.v]
    halfwidth = bernstein_halfwidth(ratios, float(rho.as_array().sum()) / rho[case.v], delta)
    mean = float(ratios.mean())
    lower_bound = None
    base = condition(system, pinning)
    try:
        lower_bound = wasserstein_hamming(
            enumerate_gibbs(condition(base, {case.v: case.a})),
            enumerate_gibbs(condition(base, {case.v: case.b})),
            rho,
        ) / rho[case.v]
    except StateCapError:
        logger.debug("Skipping the transport lower bound: support too large")
    disagreement = [float(f) for f in (xs != ys).mean(axis=0)]
    return CaseEstimate(case, mean, mean - halfwidth, mean + halfwidth, samples, lower_bound, disagreement)


@dataclass
class CIEstimate:
    value: float
    cases: List[CaseEstimate]
    target: Optional[float] = None
    label: str = EMPIRICAL_LOWER_BOUND

    @property
    def worst(self) -> Optional[CaseEstimate]:
        return max(self.cases, key=lambda c: c.mean) if self.cases else None

    @property
    def meets_target(self) -> Optional[bool]:
        """Every case mean lies within its interval of the target."""
        if self.target is None:
            return None
        return all(c.low <= self.target for c in self.cases)

    @property
    def dominates_transport(self) -> bool:
        """Coupling cost is at least the exact Wasserstein distance, up to the interval."""
        return all(c.wasserstein is None or c.high >= c.wasserstein - 1e-12 for c in self.cases)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "label": self.label,
            "target": self.target,
            "meets_target": self.meets_target,
            "dominates_transport": self.dominates_transport,
            "cases": [c.to_dict() for c in self.cases],
        }


def _estimate_case_job(args: Tuple[Any, ...]) -> CaseEstimate:
    system, rho, coupling, case, samples, seed, path, delta = args
    return estimate_case(system, rho, coupling, case, samples, RandomStream(seed, path), delta)


def estimate_ci(
    system: SpinSystem,
    rho: HammingWeight,
    coupling: str,
    spec: PinningSpec,
    pairs: int,
    samples_per_pair: int,
    stream: RandomStream,
    target: Optional[float] = None,
    delta: float = 0.05,
    jobs: int = 1,
) -> CIEstimate:
    """Max over the tested cases of the mean ``E[H_rho(X, Y)] / rho(v)``.

    Case ``i`` draws from ``stream.child(1, i)``, so the result does not
    depend on ``jobs``.
    """
    if len(rho) != system.n:
        raise DomainError("Hamming weight must cover every vertex")
    if pairs < 1 or samples_per_pair < 1:
        raise DomainError("pairs and samples_per_pair must be positive")
    cases = coupling_cases(system, spec, pairs, stream.child(0))
    if not cases:
        raise InfeasibleError("no feasible coupling case to test")
    logger.info(f"Estimating coupling independence of {coupling} on {len(cases)} cases")
    jobs_args = [
        (system, rho, coupling, case, samples_per_pair, stream.seed, stream.path + (1, i), delta)
        for i, case in enumerate(cases)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_estimate_case_job, jobs_args))
    else:
        results = [_estimate_case_job(args) for args in jobs_args]
    value = max(r.mean for r in results)
    estimate = CIEstimate(value, results, target)
    logger.info(f"Coupling independence estimate {value:.6g} ({estimate.label})")
    return estimate


@dataclass
class ValidityResult:
    passed: bool
    statistic: float
    p_value: float
    cells: int
    samples: int
    outside_support: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "cells": self.cells,
            "samples": self.samples,
            "outside_support": self.outside_support,
        }


def marginal_validity_test(
    samples: np.ndarray,
    target: ExactDistribution,
    p_threshold: Optional[float] = None,
) -> ValidityResult:
    """Chi-square goodness of fit of ``samples`` against ``target``.

    States with expected count below 5 are pooled into one cell.  Any sample
    outside the target's support fails the test outright.
    """
    samples = np.asarray(samples)
    if samples.size == 0 or len(samples) == 0:
        raise DomainError("marginal validity test needs at least one sample")
    p_threshold = p_threshold if p_threshold is not None else get_config().get_float("coupling.p_value", 1e-4)
    n = len(samples)
    rows = samples.reshape(n, -1)
    if rows.shape[1] != len(target.vertices):
        rows = rows[:, list(target.vertices)]
    idx = target.index.lookup(rows)
    outside = int((idx < 0).sum())
    if outside:
        return ValidityResult(False, math.inf, 0.0, 0, n, outside)
    observed = np.bincount(idx, minlength=target.size).astype(float)
    expected = target.prob * n
    small = expected < 5.0
    if small.any():
        observed = np.append(observed[~small], observed[small].sum())
        expected = np.append(expected[~small], expected[small].sum())
    keep = expected > 0
    observed, expected = observed[keep], expected[keep]
    if len(expected) < 2:
        return ValidityResult(True, 0.0, 1.0, len(expected), n)
    expected *= observed.sum() / expected.sum()
    statistic, p_value = chisquare(observed, expected)
    return ValidityResult(bool(p_value >= p_threshold), float(statistic), float(p_value), len(expected), n)


def coupling_validity(
    coupling: str,
    system: SpinSystem,
    pinning: Dict[int, int],
    v: int,
    a: int,
    b: int,
    samples: int,
    stream: RandomStream,
) -> Tuple[ValidityResult, ValidityResult]:
    """Gate both sides of a coupling against their exact conditionals."""
    xs, ys = sample_coupling(get_coupler(coupling), system, pinning, v, a, b, samples, stream)
    base = condition(system, pinning)
    x_result = marginal_validity_test(xs, enumerate_gibbs(condition(base, {v: a})))
    y_result = marginal_validity_test(ys, enumerate_gibbs(condition(base, {v: b})))
    logger.info(f"Validity of {coupling}: p={x_result.p_value:.3g} / {y_result.p_value:.3g}")
    return x_result, y_result


def empirical_disagreement(xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-vertex disagreement frequency and its binomial standard error."""
    if len(xs) == 0:
        raise DomainError("no samples")
    freq = (np.asarray(xs) != np.asarray(ys)).mean(axis=0)
    sigma = np.sqrt(freq * (1.0 - freq) / len(xs))
    return freq, sigma


def per_vertex_check(
    freq: np.ndarray,
    sigma: np.ndarray,
    bound: Sequence[float],
    slack_sigmas: Optional[float] = None,
) -> List[int]:
    """Vertices whose disagreement frequency exceeds ``bound`` by more than the slack."""
    k = slack_sigmas if slack_sigmas is not None else get_config().get_float("coupling.sigma_slack", 4.0)
    limit = np.asarray(bound, dtype=float) + k * sigma + 1e-12
    return [int(u) for u in np.flatnonzero(freq > limit)]
