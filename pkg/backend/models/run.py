"""
Run-level models: per-request summaries and simulator failures
"""
from pydantic import BaseModel, Field
from typing import Optional


class RequestSummary(BaseModel):
    """
    One row of the per-request CSV
    """
    rid: int = Field(..., ge=0, description="Request id")
    leaf: str = Field(..., description="Requested leaf")
    b: int = Field(..., description="Arrival time")
    e: int = Field(..., description="Deadline")
    timesteps: int = Field(default=0, ge=0, description="While-loop iterations spent on the request")
    movement_cost: float = Field(default=0.0, ge=0, description="Transfer cost incurred for the request")
    piggyback_cost: float = Field(default=0.0, ge=0, description="Tour cost charged at this critical time")
    dual_gained: float = Field(default=0.0, ge=0, description="Root dual objective gained")
    critical: bool = Field(default=False, description="Became critical at its deadline")
    piggybacked: bool = Field(default=False, description="Served by another request's tour")
    peak_mass: float = Field(default=0.0, description="Largest leaf mass seen inside the window")


# Custom Exceptions

class RunError(Exception):
    """Base exception for simulator failures"""
    pass


class InvariantBreach(RunError):
    """Raised when a runtime assertion fails; carries the trace index of the offending event"""

    def __init__(self, check: str, message: str, event_index: Optional[int] = None):
        where = f" at event {event_index}" if event_index is not None else ""
        super().__init__(f"{check} violated{where}: {message}")
        self.check = check
        self.event_index = event_index


class NoActiveLeavesAnywhere(RunError):
    """Raised when no backbone node has an active sibling subtree"""
    pass


class InfeasibleGather(RunError):
    """Raised when the drainable mass cannot cover a critical leaf's deficit"""
    pass


class WindowMismatch(RunError):
    """Raised when the k-server simulator sees a request with e ≠ b + 1"""
    pass
