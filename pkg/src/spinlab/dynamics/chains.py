"""
Chain objects: one interface over every sampler in the package.
"""
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from .bipartite import bipartite_block_matrix, bipartite_block_step
from .downup import down_up_matrix, down_up_step
from .glauber import glauber_batch, glauber_step
from .rng import RandomStream
from .simdownup import SimDownUpParams, sim_down_up_batch, sim_down_up_matrix
from .state import ChainState
from ..core.exceptions import ConfigurationError
from ..core.system import SpinSystem
from ..oracle.matrices import RESAMPLE_COMPLEMENT, TransitionMatrix, glauber_matrix
from ..partition.partition import Partition

CHAIN_NAMES = ("glauber", "downup", "simdownup", "bipartite-block")


class Chain(ABC):
    """A Markov kernel on full configurations of ``system``."""

    name: str = ""
    system: SpinSystem

    @abstractmethod
    def step(self, state: ChainState, stream: RandomStream) -> ChainState:
        """Advance one transition."""

    @abstractmethod
    def transition_matrix(self) -> TransitionMatrix:
        """Dense kernel on the support, for exact analysis."""

    def run_batch(self, configs: np.ndarray, steps: int, stream: RandomStream) -> np.ndarray:
        """Advance every row of ``configs`` by ``steps`` transitions (in place).

        Replica ``r`` draws from ``stream.child(r)``.
        """
        for r in range(len(configs)):
            replica_stream = stream.child(r)
            state = ChainState(tuple(int(c) for c in configs[r]))
            for _ in range(steps):
                state = self.step(state, replica_stream)
            configs[r] = state.config
        return configs


class GlauberChain(Chain):
    name = "glauber"

    def __init__(self, system: SpinSystem):
        self.system = system

    def step(self, state: ChainState, stream: RandomStream) -> ChainState:
        v = min(int(stream.random() * self.system.n), self.system.n - 1)
        return glauber_step(self.system, state, v, stream)

    def transition_matrix(self) -> TransitionMatrix:
        return glauber_matrix(self.system)

    def run_batch(self, configs: np.ndarray, steps: int, stream: RandomStream) -> np.ndarray:
        return glauber_batch(self.system, configs, steps, stream)


class DownUpChain(Chain):
    name = "downup"

    def __init__(self, system: SpinSystem, partition: Partition, ell: int, mode: str = RESAMPLE_COMPLEMENT):
        self.system = system
        self.partition = partition
        self.ell = ell
        self.mode = mode

    def step(self, state: ChainState, stream: RandomStream) -> ChainState:
        return down_up_step(self.system, self.partition, self.ell, state, stream, self.mode)

    def transition_matrix(self) -> TransitionMatrix:
        return down_up_matrix(self.system, self.partition, self.ell, mode=self.mode)


class SimDownUpSampler(Chain):
    """Each transition is one top-level ``SimDownUp`` call.

    Calls are keyed by the step count, so transition ``t`` always draws from
    ``stream.child(t)``.
    """

    name = "simdownup"

    def __init__(self, system: SpinSystem, partition: Partition, params: SimDownUpParams):
        self.system = system
        self.partition = partition
        self.params = params

    def step(self, state: ChainState, stream: RandomStream) -> ChainState:
        configs = state.as_array()[None, :].copy()
        sim_down_up_batch(self.system, self.partition, configs, (), self.params, stream.child(state.step_count))
        return state.advance(configs[0])

    def transition_matrix(self) -> TransitionMatrix:
        return sim_down_up_matrix(self.system, self.partition, self.params)

    def run_batch(self, configs: np.ndarray, steps: int, stream: RandomStream) -> np.ndarray:
        for t in range(steps):
            sim_down_up_batch(self.system, self.partition, configs, (), self.params, stream.child(t))
        return configs


class BipartiteBlockChain(Chain):
    name = "bipartite-block"

    def __init__(self, system: SpinSystem, partition: Partition, M: int):
        self.system = system
        self.partition = partition
        self.M = M

    def step(self, state: ChainState, stream: RandomStream) -> ChainState:
        return bipartite_block_step(self.system, self.partition, self.M, state, stream)

    def transition_matrix(self) -> TransitionMatrix:
        return bipartite_block_matrix(self.system, self.partition, self.M)


def build_chain(
    name: str,
    system: SpinSystem,
    partition: Optional[Partition] = None,
    ell: Optional[int] = None,
    M: Optional[int] = None,
    params: Optional[SimDownUpParams] = None,
    mode: str = RESAMPLE_COMPLEMENT,
) -> Chain:
    """Chain factory used by the experiment layer."""
    if name == "glauber":
        return GlauberChain(system)
    if partition is None:
        raise ConfigurationError(f"chain {name} needs a partition")
    if name == "downup":
        if ell is None:
            raise ConfigurationError("downup chain needs ell")
        return DownUpChain(system, partition, ell, mode)
    if name == "simdownup":
        if params is None:
            raise ConfigurationError("simdownup needs a schedule")
        return SimDownUpSampler(system, partition, params)
    if name == "bipartite-block":
        return BipartiteBlockChain(system, partition, M or 1)
    raise ConfigurationError(f"Unknown chain: {name}", {"known": list(CHAIN_NAMES)})
