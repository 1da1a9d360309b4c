"""
Error types raised across spinlab.

Every error carries a ``details`` dict that the CLI prints next to the message.
"""
from typing import Any, Dict, Optional


class SpinLabError(Exception):
    """Base class for all spinlab errors."""

    exit_code = 2

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = dict(details or {})

    def __str__(self) -> str:
        if not self.details:
            return self.message
        extra = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"{self.message} ({extra})"


class DomainError(SpinLabError, ValueError):
    """A value lies outside its allowed domain (spin, parameter, order)."""


class ConsistencyError(SpinLabError, ValueError):
    """Inputs contradict each other or a structural precondition."""


class InfeasibleError(SpinLabError):
    """The (conditional) total weight is zero."""

    exit_code = 3


class StateCapError(SpinLabError):
    """An exact computation would exceed a configured size cap."""


class FrozenStateError(SpinLabError):
    """A chain reached a state whose conditional weights are all zero."""

    exit_code = 3


class ConstructionError(SpinLabError):
    """Randomized partition construction exhausted its budget."""

    exit_code = 1


class DepthCapError(SpinLabError):
    """Recursion or tree construction exceeded its cap."""


class ConfigurationError(SpinLabError):
    """Configuration or CLI arguments are unusable."""
