"""
Splittable counter-based random streams.

Every chain owns one ``RandomStream``.  Child streams are derived from the
root seed and a path of non-negative integers, so recursive samplers get the
same randomness regardless of how work is scheduled.
"""
from typing import Any, Dict, List, Tuple

import numpy as np


class RandomStream:
    def __init__(self, seed: int, path: Tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, *path: int) -> "RandomStream":
        return RandomStream(self.seed, self.path + tuple(path))

    def spawn(self, count: int) -> List["RandomStream"]:
        return [self.child(i) for i in range(count)]

    def random(self, size: Any = None) -> Any:
        return self.generator.random(size)

    def integers(self, low: int, high: int = None, size: Any = None) -> Any:
        return self.generator.integers(low, high, size=size)

    def normal(self, size: Any = None) -> Any:
        return self.generator.standard_normal(size)

    def choice(self, a: Any, size: Any = None, replace: bool = True) -> Any:
        return self.generator.choice(a, size=size, replace=replace)

    def dirichlet(self, alpha: Any, size: Any = None) -> Any:
        return self.generator.dirichlet(alpha, size=size)

    def state(self) -> Dict[str, Any]:
        """Bit-generator counter state, for checkpoints."""
        return self.generator.bit_generator.state

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"
