"""
Model constructors, model files and the model-specific constants.

Two-spin systems use spin 0 for ``-`` and spin 1 for ``+``; the field is
``(1, lambda)`` and the interaction is ``[[gamma, 1], [1, beta]]`` so that the
weight is ``lambda^{n_+} beta^{m_+} gamma^{m_-}``.
"""
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError
from scipy.optimize import brentq

from .exceptions import ConfigurationError, ConsistencyError, DomainError
from .graph import Graph
from .system import ModelInfo, PartialConfig, SpinSystem
from ..models.schemas import ModelSpec
from ..utils.logger import get_logger

logger = get_logger(__name__)


def make_two_spin(graph: Graph, beta: float, gamma: float, lam: float) -> SpinSystem:
    if beta < 0 or gamma <= 0 or lam <= 0:
        raise DomainError(
            "two-spin parameters need beta >= 0, gamma > 0, lambda > 0",
            {"beta": beta, "gamma": gamma, "lambda": lam},
        )
    interaction = np.array([[gamma, 1.0], [1.0, beta]])
    return SpinSystem.create(
        graph,
        2,
        np.array([1.0, lam]),
        interaction,
        model=ModelInfo("two_spin", {"beta": beta, "gamma": gamma, "lambda": lam}),
    )


def _hardcore(graph: Graph, lam: float, name: str) -> SpinSystem:
    if lam <= 0:
        raise DomainError("hardcore fugacity must be positive", {"lambda": lam})
    return SpinSystem.create(
        graph,
        2,
        np.array([1.0, lam]),
        np.array([[1.0, 1.0], [1.0, 0.0]]),
        model=ModelInfo(name, {"beta": 0.0, "gamma": 1.0, "lambda": lam}),
    )


def make_hardcore(graph: Graph, lam: float) -> SpinSystem:
    return _hardcore(graph, lam, "hardcore")


def make_bipartite_hardcore(graph: Graph, lam: float) -> SpinSystem:
    if graph.bipartition is None:
        raise ConsistencyError("bipartite hardcore needs a graph with a bipartition")
    return _hardcore(graph, lam, "bipartite_hardcore")


def make_list_coloring(graph: Graph, lists: Sequence[Iterable[int]], q: Optional[int] = None) -> SpinSystem:
    """Uniform proper list colorings; colors are 0-based indices into ``[q]``."""
    color_lists = [sorted(set(int(c) for c in colors)) for colors in lists]
    if len(color_lists) != graph.vertex_count:
        raise ConsistencyError("one color list per vertex is required")
    if any(not colors for colors in color_lists):
        raise DomainError("color lists must be nonempty")
    largest = max((colors[-1] for colors in color_lists), default=1)
    q = q if q is not None else max(largest + 1, 2)
    if largest >= q:
        raise DomainError("color outside [q]", {"q": q, "color": largest})
    fields = np.zeros((graph.vertex_count, q))
    for v, colors in enumerate(color_lists):
        fields[v, colors] = 1.0
    return SpinSystem.create(
        graph,
        q,
        fields,
        1.0 - np.eye(q),
        domain=color_lists,
        model=ModelInfo("list_coloring", {"q": q, "lists": color_lists}),
    )


def lambda_critical(delta: int) -> float:
    """Tree-uniqueness threshold ``(d-1)^(d-1) / (d-2)^d`` of the hardcore model."""
    if int(delta) != delta or delta < 3:
        raise DomainError("lambda_critical needs an integer degree >= 3", {"delta": delta})
    d = int(delta)
    return (d - 1) ** (d - 1) / (d - 2) ** d


def alpha_star() -> float:
    """Unique positive root of ``alpha = exp(1 / alpha)`` (about 1.763)."""
    root = brentq(lambda a: a - math.exp(1.0 / a), 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    residual = root - math.exp(1.0 / root)
    if abs(residual) > 1e-12:
        raise ArithmeticError(f"alpha_star residual too large: {residual}")
    return root


def build_model(graph: Graph, spec: ModelSpec) -> SpinSystem:
    if spec.model == "hardcore":
        return make_hardcore(graph, spec.lam)
    if spec.model == "bipartite_hardcore":
        return make_bipartite_hardcore(graph, spec.lam)
    if spec.model == "two_spin":
        return make_two_spin(graph, spec.beta, spec.gamma, spec.lam)
    lists = spec.lists
    if lists is None:
        lists = [list(range(spec.q))] * graph.vertex_count
    return make_list_coloring(graph, lists, spec.q)


def load_model_file(path: Union[str, Path]) -> ModelSpec:
    try:
        data = json.loads(Path(path).read_text())
        return ModelSpec.model_validate(data)
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        logger.error(f"Failed to load model file {path}: {e}")
        raise ConfigurationError(f"Invalid model file: {path}", {"error": str(e)}) from e


def save_model_file(spec: ModelSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(spec.model_dump_json(by_alias=True, exclude_none=True, indent=2))


def load_pinning_file(path: Union[str, Path]) -> PartialConfig:
    try:
        return PartialConfig.from_json(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, ValueError) as e:
        logger.error(f"Failed to load pinning file {path}: {e}")
        raise ConfigurationError(f"Invalid pinning file: {path}", {"error": str(e)}) from e
