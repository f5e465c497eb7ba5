"""
Audit and run report schemas
"""
from pydantic import BaseModel, Field, field_validator
from typing import Dict, List, Literal, Optional

from models.run import RequestSummary


class InvariantResult(BaseModel):
    """
    Pass/fail of one audited property
    """
    name: str = Field(..., description="Property name")
    passed: bool = Field(..., description="No counterexample found")
    checked: int = Field(default=0, ge=0, description="Number of instances of the property checked")
    worst: Optional[float] = Field(default=None, description="Worst observed ratio or margin")
    counterexample: Optional[str] = Field(default=None, description="First counterexample")
    event_index: Optional[int] = Field(default=None, description="Trace index of the counterexample")


class AuditReport(BaseModel):
    """
    Everything the auditor derives from a trace
    """
    algorithm: Literal["kserver", "tw"] = Field(..., description="Simulated algorithm")
    events: int = Field(default=0, ge=0, description="Trace length")
    invariants: List[InvariantResult] = Field(default_factory=list, description="Audited properties")
    beta_measured: float = Field(default=0.0, ge=0, description="max over (v,u,t) of dual load / c_u")
    beta_by_node: Dict[str, float] = Field(default_factory=dict, description="β per local LP")
    congestion: Dict[str, Dict[int, int]] = Field(
        default_factory=dict,
        description="Histogram of pointwise congestion per check"
    )
    m_value: float = Field(default=0.0, description="M used by the run")
    y_bound: float = Field(default=0.0, description="4γM + k")
    y_max: float = Field(default=0.0, ge=0, description="Largest primal value seen")
    max_su: int = Field(default=0, ge=0, description="Largest S_u formed")
    movement_cost: float = Field(default=0.0, ge=0, description="Σ amount × upward cost over transfers")
    piggyback_cost: float = Field(default=0.0, ge=0, description="Σ tour charges")
    root_dual: float = Field(default=0.0, ge=0, description="Σ b^C z_C over root constraints")
    constraints: int = Field(default=0, ge=0, description="Constraints created")
    requests: List[RequestSummary] = Field(default_factory=list, description="Per-request rows")

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.invariants)

    def failures(self) -> List[InvariantResult]:
        return [result for result in self.invariants if not result.passed]


class RunReport(BaseModel):
    """
    Headline numbers of one run, optionally certified against an offline optimum
    """
    schema_version: str = Field(..., description="Report schema tag")
    instance_digest: str = Field(..., description="sha256 of the rendered instance")
    algorithm: Literal["kserver", "tw"] = Field(..., description="Simulated algorithm")
    requests: int = Field(default=0, ge=0, description="Number of requests")
    movement_cost: float = Field(default=0.0, ge=0, description="Total transfer cost")
    piggyback_cost: float = Field(default=0.0, ge=0, description="Total tour cost")
    root_dual: float = Field(default=0.0, ge=0, description="Root dual objective")
    beta_measured: float = Field(default=0.0, ge=0, description="Measured dual infeasibility factor")
    opt_cost: Optional[float] = Field(default=None, description="Offline optimum when an oracle ran")
    oracle: Optional[str] = Field(default=None, description="Oracle used")
    root_violations: Optional[int] = Field(default=None, description="Root constraints violated by OPT′")
    certified_ratio: Optional[float] = Field(default=None, description="(movement + piggyback) / opt")
    note: Optional[str] = Field(default=None, description="Why a ratio is missing")
    invariants: Dict[str, bool] = Field(default_factory=dict, description="Pass/fail per property")
    wall_time: Optional[float] = Field(default=None, description="Seconds, only with --timing")

    @field_validator("certified_ratio")
    @classmethod
    def validate_ratio(cls, v: Optional[float], info) -> Optional[float]:
        """A ratio needs a positive optimum"""
        if v is not None and not info.data.get("opt_cost"):
            raise ValueError("certified_ratio requires a positive opt_cost")
        return v

    @property
    def passed(self) -> bool:
        return all(self.invariants.values())
