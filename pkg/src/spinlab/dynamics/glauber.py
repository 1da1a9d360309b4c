"""
Single-site heat-bath (Glauber) updates.

The batch engine advances ``R`` replicas at once: every step draws two
uniforms per replica, one for the vertex and one for the new spin.  A
single-chain run is the one-replica batch, so both consume the stream
identically.
"""
from typing import List, Optional

import numpy as np

from .rng import RandomStream
from .state import ChainState
from ..core.exceptions import DomainError, FrozenStateError
from ..core.system import SpinSystem
from ..utils.logger import get_logger

logger = get_logger(__name__)


def site_weights(system: SpinSystem, configs: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Unnormalized conditional weights of ``vertices[r]`` given ``configs[r]``.

    Returns an ``R x q`` array.  Rows of pinned vertices are not meaningful;
    callers skip them.
    """
    table, mats = system.neighbor_tables
    rows = np.arange(len(vertices))[:, None]
    slots = np.arange(table.shape[1])[None, :]
    neighbor_spins = configs[rows, table[vertices]]
    factors = mats[vertices][rows, slots, :, neighbor_spins]
    return system.field[vertices] * factors.prod(axis=1)


def draw_spins(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw per row from unnormalized weights; ``u`` lies in ``(0, 1]``."""
    cumulative = np.cumsum(weights, axis=1)
    target = u * cumulative[:, -1]
    return (cumulative < target[:, None]).sum(axis=1)


def _pick_vertices(
    u: np.ndarray, n: int, allowed_cumsum: Optional[np.ndarray], counts: Optional[np.ndarray]
) -> np.ndarray:
    if allowed_cumsum is None:
        return np.minimum((u * n).astype(np.int64), n - 1)
    idx = np.minimum((u * counts).astype(np.int64), np.maximum(counts - 1, 0))
    return np.argmax(allowed_cumsum > idx[:, None], axis=1)


def update_sites(
    system: SpinSystem,
    configs: np.ndarray,
    vertices: np.ndarray,
    u: np.ndarray,
    active: Optional[np.ndarray] = None,
) -> None:
    """Heat-bath update of ``configs[r, vertices[r]]`` in place."""
    moving = system.free_mask[vertices]
    if active is not None:
        moving = moving & active
    if not moving.any():
        return
    rows = np.flatnonzero(moving)
    vs = vertices[rows]
    weights = site_weights(system, configs[rows], vs)
    totals = weights.sum(axis=1)
    if np.any(totals <= 0):
        bad = int(rows[np.argmax(totals <= 0)])
        v = int(vertices[bad])
        logger.error(f"Frozen state at vertex {v}")
        raise FrozenStateError(
            "all conditional weights are zero", {"vertex": v, "config": configs[bad].tolist()}
        )
    configs[rows, vs] = draw_spins(weights, u[rows])


def glauber_batch(
    system: SpinSystem,
    configs: np.ndarray,
    steps: int,
    stream: RandomStream,
    allowed: Optional[np.ndarray] = None,
    record: Optional[List[np.ndarray]] = None,
) -> np.ndarray:
    """Run ``steps`` Glauber steps on every row of ``configs`` (modified in place).

    ``allowed`` (``n`` or ``R x n`` booleans) restricts the uniform vertex
    choice per replica; replicas with no allowed vertex stay put.  When
    ``record`` is a list the chosen vertices of each step are appended to it.
    """
    if steps < 0:
        raise DomainError("step count must be nonnegative", {"steps": steps})
    n = system.n
    replicas = len(configs)
    if n == 0 or replicas == 0:
        return configs
    allowed_cumsum = counts = active = None
    if allowed is not None:
        mask = np.broadcast_to(np.asarray(allowed, dtype=bool), (replicas, n))
        allowed_cumsum = np.cumsum(mask, axis=1)
        counts = allowed_cumsum[:, -1]
        active = counts > 0
    for _ in range(steps):
        u = 1.0 - stream.random((replicas, 2))
        vertices = _pick_vertices(u[:, 0], n, allowed_cumsum, counts)
        if record is not None:
            record.append(np.where(active, vertices, -1) if active is not None else vertices)
        update_sites(system, configs, vertices, u[:, 1], active)
    return configs


def glauber_step(system: SpinSystem, state: ChainState, v: int, stream: RandomStream) -> ChainState:
    """Resample ``v`` from its conditional given the rest; pinned ``v`` keeps its value."""
    if not 0 <= v < system.n:
        raise DomainError("vertex out of range", {"vertex": v})
    if system.is_pinned(v):
        return state.advance(state.config)
    weights = system.conditional_weights(v, state.config)
    if weights.sum() <= 0:
        raise FrozenStateError("all conditional weights are zero", {"vertex": v, "config": list(state.config)})
    spin = int(draw_spins(weights[None, :], np.array([1.0 - stream.random()]))[0])
    config = list(state.config)
    config[v] = spin
    return state.advance(config)


def run_glauber(system: SpinSystem, state0: ChainState, T: int, stream: RandomStream) -> ChainState:
    """``T`` steps of uniform-vertex Glauber dynamics."""
    configs = state0.as_array()[None, :].copy()
    glauber_batch(system, configs, T, stream)
    return state0.advance(configs[0], T)
