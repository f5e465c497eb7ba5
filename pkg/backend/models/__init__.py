"""
Domain models for the HST k-server simulator
"""
from .hst import Hst, HstNode
from .instance import Instance, ParamSet, Request, Timestep
from .report import AuditReport, InvariantResult, RunReport
from .run import RequestSummary

__all__ = [
    "Hst",
    "HstNode",
    "Instance",
    "ParamSet",
    "Request",
    "Timestep",
    "AuditReport",
    "InvariantResult",
    "RunReport",
    "RequestSummary",
]
