"""
Offline oracle results and root-constraint verification reports
"""
from pydantic import BaseModel, Field
from typing import List, Optional


class Movement(BaseModel):
    """
    Upward crossing of the edge above a node at a timestep
    """
    node: str = Field(..., description="Node whose parent edge is crossed")
    q: int = Field(..., description="Request slot of the crossing")
    tick: int = Field(default=0, ge=0, description="Tick inside the slot")
    amount: float = Field(..., gt=0, description="Mass moved across the edge")


class OracleCertificate(BaseModel):
    """
    Optimal offline solution with its movement list
    """
    opt_cost: float = Field(..., ge=0, description="Optimal movement cost")
    method: str = Field(..., description="flow or brute")
    with_start: bool = Field(default=False, description="Solution first visits the dummy leaves")
    graph_nodes: int = Field(default=0, ge=0, description="Nodes in the time-expanded graph")
    assignments: int = Field(default=1, ge=1, description="Service-time assignments examined")
    service_times: List[int] = Field(default_factory=list, description="Chosen service time per request")
    movements: List[Movement] = Field(default_factory=list, description="Upward crossings")


class RootViolation(BaseModel):
    """
    A root constraint the offline solution does not satisfy
    """
    cid: int = Field(..., description="Constraint id")
    lhs: float = Field(..., description="LHS evaluated on the solution")
    rhs: float = Field(..., description="Constraint RHS")


class RootCheckReport(BaseModel):
    """
    Result of evaluating every root constraint on an offline solution
    """
    checked: int = Field(default=0, ge=0, description="Non-⊥ root constraints evaluated")
    violations: List[RootViolation] = Field(default_factory=list, description="Constraints with LHS < RHS")
    min_slack: Optional[float] = Field(default=None, description="Smallest LHS − RHS seen")

    @property
    def ok(self) -> bool:
        return not self.violations


# Custom Exceptions

class OracleError(Exception):
    """Base exception for offline oracle errors"""
    pass


class GraphTooLarge(OracleError):
    """Raised when the time-expanded graph exceeds ORACLE_NODE_CAP"""
    pass


class TooManyCombinations(OracleError):
    """Raised when brute-force enumeration exceeds its cap"""
    pass
