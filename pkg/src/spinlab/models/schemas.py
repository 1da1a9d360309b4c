"""
Pydantic schemas for everything that crosses a file boundary.
"""
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ModelSpec(BaseModel):
    """A model file: ``{"model": "hardcore", "lambda": 1.0}`` and friends."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    model: Literal["hardcore", "two_spin", "list_coloring", "bipartite_hardcore"]
    lam: Optional[float] = Field(default=None, alias="lambda", gt=0)
    beta: Optional[float] = Field(default=None, ge=0)
    gamma: Optional[float] = Field(default=None, gt=0)
    lists: Optional[List[List[int]]] = None
    q: Optional[int] = Field(default=None, ge=2)

    @model_validator(mode="after")
    def check_parameters(self) -> "ModelSpec":
        if self.model in ("hardcore", "bipartite_hardcore") and self.lam is None:
            raise ValueError(f"{self.model} requires lambda")
        if self.model == "two_spin" and None in (self.lam, self.beta, self.gamma):
            raise ValueError("two_spin requires lambda, beta and gamma")
        if self.model == "list_coloring" and self.lists is None and self.q is None:
            raise ValueError("list_coloring requires lists or q")
        return self


class PartitionSpec(BaseModel):
    k: int = Field(ge=1)
    blocks: List[List[int]]

    @model_validator(mode="after")
    def check_block_count(self) -> "PartitionSpec":
        if len(self.blocks) != self.k:
            raise ValueError(f"expected {self.k} blocks, got {len(self.blocks)}")
        return self


class GapReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    chain: str
    states: int
    lambda2: float
    gap: float
    t_rel: float
    min_eigenvalue: float


class RunManifest(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    experiment: str
    config_hash: str
    seed: Optional[int] = None
    module_versions: Dict[str, str] = Field(default_factory=dict)
    started_at: datetime
    wall_clock_seconds: float = 0.0
    parameters: Dict[str, Any] = Field(default_factory=dict)
    outcome: Dict[str, Any] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)


class CriterionResult(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    criterion: int
    name: str
    passed: bool
    detail: str = ""
    runtime_seconds: float = 0.0
    metrics: Dict[str, Any] = Field(default_factory=dict)


class AcceptanceReport(BaseModel):
    suite: str
    quick: bool = False
    passed: bool
    results: List[CriterionResult] = Field(default_factory=list)

    def failed(self) -> List[CriterionResult]:
        return [r for r in self.results if not r.passed]
