"""
Exact optimal transport under weighted Hamming cost.
"""
from typing import Optional

import numpy as np
import ot

from .exact import ExactDistribution
from ..core.exceptions import DomainError, StateCapError
from ..core.system import HammingWeight
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)


def hamming_cost_matrix(xs: np.ndarray, ys: np.ndarray, rho: HammingWeight) -> np.ndarray:
    weights = rho.as_array()
    if xs.shape[1] != len(weights) or ys.shape[1] != len(weights):
        raise DomainError("Hamming weight does not match the configuration width")
    cost = np.zeros((len(xs), len(ys)))
    for j, w in enumerate(weights):
        cost += w * (xs[:, j][:, None] != ys[:, j][None, :])
    return cost


def transport_cost(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> float:
    """Exact earth mover's cost between two probability vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a, b = a / a.sum(), b / b.sum()
    return float(ot.emd2(a, b, np.ascontiguousarray(cost, dtype=np.float64), numItermax=1_000_000))


def wasserstein_hamming(
    nu: ExactDistribution,
    mu: ExactDistribution,
    rho: HammingWeight,
    cap: Optional[int] = None,
) -> float:
    """Minimum of ``E[H_rho(X, Y)]`` over all couplings of ``nu`` and ``mu``."""
    if nu.vertices != mu.vertices:
        raise DomainError("distributions are over different vertex sets")
    cap = cap or get_config().get_int("oracle.transport_cap", 4096)
    if max(nu.size, mu.size) > cap:
        raise StateCapError("support too large for exact transport", {"sizes": (nu.size, mu.size), "cap": cap})
    width_rho = HammingWeight(tuple(rho[v] for v in nu.vertices))
    cost = hamming_cost_matrix(nu.support.astype(np.int64), mu.support.astype(np.int64), width_rho)
    value = transport_cost(nu.prob, mu.prob, cost)
    logger.debug(f"Wasserstein-Hamming over {nu.size}x{mu.size} supports: {value:.6g}")
    return value
