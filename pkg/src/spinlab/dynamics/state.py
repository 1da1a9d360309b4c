"""
Chain state shared by every sampler.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from ..core.exceptions import ConsistencyError
from ..core.system import SpinSystem, config_from_string, config_to_string


@dataclass(frozen=True)
class ChainState:
    """Full configuration plus the bookkeeping needed to resume a run."""

    config: Tuple[int, ...]
    step_count: int = 0
    seed: int = 0
    path: Tuple[int, ...] = field(default_factory=tuple)

    @classmethod
    def initial(cls, system: SpinSystem, config: Sequence[int], seed: int = 0) -> "ChainState":
        state = cls(tuple(int(c) for c in config), 0, seed)
        state.check(system)
        return state

    def check(self, system: SpinSystem) -> None:
        """Raise if the configuration disagrees with the system's pinning."""
        if len(self.config) != system.n:
            raise ConsistencyError("state must assign every vertex", {"length": len(self.config)})
        for v, c in system.pinning.items():
            if self.config[v] != c:
                raise ConsistencyError("state disagrees with the pinning", {"vertex": v, "pinned": c})

    def as_array(self) -> np.ndarray:
        return np.asarray(self.config, dtype=np.int64)

    def advance(self, config: Sequence[int], steps: int = 1) -> "ChainState":
        return replace(self, config=tuple(int(c) for c in config), step_count=self.step_count + steps)

    def to_dict(self, q: int) -> Dict[str, Any]:
        return {
            "config": config_to_string(self.config, q),
            "step_count": self.step_count,
            "seed": self.seed,
            "path": list(self.path),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], q: int) -> "ChainState":
        return cls(
            config=config_from_string(data["config"], q),
            step_count=int(data.get("step_count", 0)),
            seed=int(data.get("seed", 0)),
            path=tuple(data.get("path", ())),
        )
