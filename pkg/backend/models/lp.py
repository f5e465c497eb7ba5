"""
Truncated local LP state: constraints, constraint sets, awake timesteps and primal values
"""
from bisect import bisect_right, insort
from typing import Any, Dict, List, Optional, Set, Tuple

from models.instance import Timestep

# (node, lo, hi): the interval sum y(node, (lo, hi])
Term = Tuple[str, Timestep, Timestep]

SOURCE_INITIAL = "Initial"
SOURCE_SIMPLE = "SimpleUpdate"
SOURCE_FULL = "FullUpdate"


class TruncatedConstraint:
    """
    One truncated covering constraint of a local LP.

    Composed constraints keep references to the child constraints they were built
    from instead of copying their terms; lhs_terms() flattens the whole chain.
    """

    __slots__ = (
        "cid",
        "owner",
        "end",
        "direct_terms",
        "picks",
        "rhs",
        "is_bot",
        "source",
        "z",
        "parent_load",
        "depleted",
        "request",
    )

    def __init__(
        self,
        cid: int,
        owner: str,
        end: Timestep,
        rhs: float,
        source: str,
        direct_terms: Tuple[Term, ...] = (),
        picks: Tuple["TruncatedConstraint", ...] = (),
        is_bot: bool = False,
        request: Optional[Tuple[str, int, int]] = None,
    ):
        self.cid = cid
        self.owner = owner
        self.end = end
        self.direct_terms = direct_terms
        self.picks = picks
        self.rhs = rhs
        self.is_bot = is_bot
        self.source = source
        self.z = 0.0
        self.parent_load = 0.0
        self.depleted = False
        # (leaf, b, e) of the request behind a time-window ⊥-constraint
        self.request = request

    def lhs_terms(self) -> List[Term]:
        terms: List[Term] = []
        stack = [self]
        while stack:
            constraint = stack.pop()
            terms.extend(constraint.direct_terms)
            stack.extend(constraint.picks)
        return terms

    def margin(self, height: int) -> float:
        """(1 + 1/H)·z minus the dual already placed on this constraint by the parent"""
        return (1.0 + 1.0 / height) * self.z - self.parent_load

    def to_event(self) -> Dict[str, Any]:
        return {
            "cid": self.cid,
            "owner": self.owner,
            "end": self.end.as_list(),
            "terms": [[node, lo.as_list(), hi.as_list()] for node, lo, hi in self.direct_terms],
            "picks": [pick.cid for pick in self.picks],
            "rhs": self.rhs,
            "bot": self.is_bot,
            "source": self.source,
            "request": list(self.request) if self.request else None,
        }

    def __repr__(self) -> str:
        kind = "⊥" if self.is_bot else "C"
        return f"{kind}#{self.cid}({self.owner}@{tuple(self.end)}, b={self.rhs:.6g}, z={self.z:.6g})"


class LocalLp:
    """
    Local LP of one tree node: timesteps, constraint sets, Γ budgets and y values
    """

    def __init__(self, node: str, level: int):
        self.node = node
        self.level = level
        self.solitary: Set[Timestep] = set()
        self.non_solitary: List[Timestep] = []
        self.awake: List[Timestep] = []
        self.cons: Dict[Timestep, List[TruncatedConstraint]] = {}
        self.gamma_budget: Dict[Timestep, float] = {}
        self.y: Dict[Tuple[str, Timestep], float] = {}
        self.y_max = 0.0

    def add_solitary(self, tau: Timestep, constraint: TruncatedConstraint) -> None:
        self.solitary.add(tau)
        self.cons[tau] = [constraint]
        insort(self.awake, tau)

    def add_non_solitary(self, tau: Timestep) -> None:
        if not self.non_solitary or self.non_solitary[-1] < tau:
            self.non_solitary.append(tau)
        else:
            insort(self.non_solitary, tau)
        self.cons.setdefault(tau, [])
        if not self.is_awake(tau):
            insort(self.awake, tau)

    def is_awake(self, tau: Timestep) -> bool:
        index = bisect_right(self.awake, tau)
        return index > 0 and self.awake[index - 1] == tau

    def remove_awake(self, tau: Timestep) -> None:
        index = bisect_right(self.awake, tau)
        if index == 0 or self.awake[index - 1] != tau:
            raise NoAwakeTimestep(f"{tau} is not awake at {self.node!r}")
        del self.awake[index - 1]

    def non_solitary_between(self, lo: Timestep, hi: Timestep) -> List[Timestep]:
        """Non-solitary timesteps in (lo, hi]"""
        start = bisect_right(self.non_solitary, lo)
        stop = bisect_right(self.non_solitary, hi)
        return self.non_solitary[start:stop]

    def raise_y(self, key: Tuple[str, Timestep], value: float) -> float:
        previous = self.y.get(key, 0.0)
        self.y[key] = value
        if value > self.y_max:
            self.y_max = value
        return value - previous

    def constraints(self) -> List[TruncatedConstraint]:
        return [c for tau in sorted(self.cons) for c in self.cons[tau]]


# Custom Exceptions

class LpError(Exception):
    """Base exception for local LP bookkeeping errors"""
    pass


class NonPositiveRhs(LpError):
    """Raised when a new constraint would have b^C ≤ 0"""
    pass


class NotSlack(LpError):
    """Raised when a depleted constraint is offered for composition"""
    pass


class ChildMissing(LpError):
    """Raised when a child with active leaves has no pick in a composition"""
    pass


class NoAwakeTimestep(LpError):
    """Raised when a node has no awake timestep at or before the query"""
    pass


class InsufficientMass(LpError):
    """Raised when the source leaves cannot supply a transfer above the δ/2 floor"""
    pass


class OutOfOrderEntry(LpError):
    """Raised when a ledger entry is booked before the latest recorded timestep"""
    pass


class NotAncestor(LpError):
    """Raised when a ⊥-constraint is requested for a node that is not above the request leaf"""
    pass
