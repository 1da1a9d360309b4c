"""
Mixing-time estimation, exact or by Monte Carlo.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from .censoring import Orders, max_state
from .chains import Chain
from .downup import feasible_start
from .rng import RandomStream
from ..core.exceptions import DomainError
from ..core.system import config_to_string
from ..oracle.exact import ExactDistribution, divergence, enumerate_gibbs, tv_estimation_bias
from ..oracle.matrices import mixing_time, tv_curve, worst_tv
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

EXACT = "exact"
MONTE_CARLO = "mc"


@dataclass
class MixingEstimate:
    mode: str
    epsilon: float
    t_mix: Optional[int]
    start: Optional[str] = None
    curve: List[float] = field(default_factory=list)
    bias_bound: float = 0.0
    replicas: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "epsilon": self.epsilon,
            "t_mix": self.t_mix,
            "start": self.start,
            "bias_bound": self.bias_bound,
            "replicas": self.replicas,
            "steps": len(self.curve) - 1 if self.curve else 0,
        }


def _start_state(chain: Chain, start: Optional[np.ndarray], orders: Optional[Orders]) -> np.ndarray:
    if start is not None:
        return np.asarray(start, dtype=np.int64)
    if orders is not None:
        return max_state(chain.system, orders)
    return feasible_start(chain.system)


def estimate_mixing(
    chain: Chain,
    epsilon: float,
    replicas: int,
    stream: RandomStream,
    mode: str = EXACT,
    start: Optional[np.ndarray] = None,
    orders: Optional[Orders] = None,
    t_max: Optional[int] = None,
    progress: bool = False,
) -> MixingEstimate:
    """First ``t`` at which the chain is within ``epsilon`` of its stationary law.

    Exact mode maximizes over every start (or uses ``start`` if given).
    Monte Carlo mode runs ``replicas`` trajectories from ``start``, the
    maximal state under ``orders``, or the first enumerated configuration,
    and reports the multinomial bias bound of the empirical TV.
    """
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)", {"epsilon": epsilon})
    t_max = t_max or get_config().get_int("dynamics.mixing_t_max", 100000)
    system = chain.system
    logger.info(f"Estimating mixing time of {chain.name} ({mode}), epsilon={epsilon}")

    if mode == EXACT:
        matrix = chain.transition_matrix()
        if start is None and orders is None:
            t_mix = mixing_time(matrix, epsilon, t_max=t_max)
            return MixingEstimate(EXACT, epsilon, t_mix)
        x0 = _start_state(chain, start, orders)
        index = int(matrix.stationary.index.lookup(x0)[0])
        if index < 0:
            raise DomainError("start state is outside the support")
        t_mix = mixing_time(matrix, epsilon, starts=[index], t_max=t_max)
        steps = t_mix if t_mix is not None else min(t_max, 1000)
        return MixingEstimate(
            EXACT, epsilon, t_mix, config_to_string(x0, system.q), tv_curve(matrix, index, steps)
        )

    if mode != MONTE_CARLO:
        raise DomainError(f"Unknown estimation mode: {mode}")
    if replicas < 1:
        raise DomainError("replicas must be positive", {"replicas": replicas})
    mu = enumerate_gibbs(system)
    x0 = _start_state(chain, start, orders)
    configs = np.tile(x0, (replicas, 1))
    vertices = tuple(range(system.n))

    def empirical_tv() -> float:
        return divergence("tv", ExactDistribution.from_samples(configs, vertices, system.q), mu)

    curve = [empirical_tv()]
    t_mix = None
    with tqdm(total=t_max, desc=f"mix:{chain.name}", disable=not progress) as bar:
        for t in range(1, t_max + 1):
            chain.run_batch(configs, 1, stream.child(t))
            curve.append(empirical_tv())
            bar.update(1)
            if curve[-1] <= epsilon:
                t_mix = t
                break
    if t_mix is None:
        logger.warning(f"Monte Carlo TV stayed above {epsilon} for {t_max} steps")
    return MixingEstimate(
        MONTE_CARLO,
        epsilon,
        t_mix,
        config_to_string(x0, system.q),
        curve,
        tv_estimation_bias(mu.size, replicas),
        replicas,
    )


def exact_tv_after(chain: Chain, t: int, start: Optional[np.ndarray] = None) -> float:
    """Exact TV after ``t`` steps, worst start or from ``start``."""
    matrix = chain.transition_matrix()
    if start is None:
        return worst_tv(matrix, t)
    index = int(matrix.stationary.index.lookup(np.asarray(start))[0])
    return worst_tv(matrix, t, np.array([index]))
