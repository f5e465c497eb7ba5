"""
Request, timestep, parameter and instance models
"""
from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence

from models.hst import Hst


class Timestep(NamedTuple):
    """
    Timestep τ = (q, tick), ordered lexicographically.

    Tick 0 is the request time q itself; (q, 1) is the first timestep after q.
    """
    q: int
    tick: int = 0

    def floor(self) -> int:
        return self.q

    def next(self) -> "Timestep":
        return Timestep(self.q, self.tick + 1)

    def as_list(self) -> List[int]:
        return [self.q, self.tick]

    @classmethod
    def from_list(cls, value: Sequence[int]) -> "Timestep":
        return cls(int(value[0]), int(value[1]))


ORIGIN = Timestep(0, 0)


class Request(BaseModel):
    """
    A request at a leaf, alive during [b, e]
    """
    model_config = ConfigDict(frozen=True)

    rid: int = Field(..., ge=0, description="Position in the arrival order")
    leaf: str = Field(..., min_length=1, description="Requested leaf")
    b: int = Field(..., ge=1, description="Arrival time")
    e: int = Field(..., ge=1, description="Deadline")

    @field_validator("e")
    @classmethod
    def validate_window(cls, v: int, info) -> int:
        """Deadline may not precede arrival"""
        if "b" in info.data and v < info.data["b"]:
            raise ValueError(f"Deadline {v} precedes arrival {info.data['b']}")
        return v

    @property
    def is_unit_window(self) -> bool:
        return self.e == self.b + 1


class ParamSet(BaseModel):
    """
    Scale parameters δ′, δ, γ plus the knobs that shape the δ-terms
    """
    model_config = ConfigDict(frozen=True)

    delta_prime: float = Field(..., gt=0, lt=1, description="Saturation slack δ′")
    delta: float = Field(..., gt=0, description="Activity threshold δ")
    gamma: float = Field(..., gt=0, description="Per-timestep dual increment γ")
    m_override: Optional[float] = Field(default=None, gt=0, description="Override for M")
    count_dummies_in_n: bool = Field(default=True, description="Dummy chains count towards n")
    subtree_measure: Literal["nodes", "leaves"] = Field(
        default="nodes",
        description="Subtree weight used by the δ-terms"
    )

    @classmethod
    def defaults(
        cls,
        n: int,
        time_windows: bool,
        aspect: float,
        count_dummies_in_n: bool = True,
        subtree_measure: str = "nodes",
    ) -> "ParamSet":
        """δ′ = 1/n², δ = 1/(10n³), γ = 1/n⁴ (divided by Δ for time windows)"""
        gamma = 1.0 / n ** 4
        if time_windows:
            gamma /= aspect
        return cls(
            delta_prime=1.0 / n ** 2,
            delta=1.0 / (10 * n ** 3),
            gamma=gamma,
            count_dummies_in_n=count_dummies_in_n,
            subtree_measure=subtree_measure,
        )

    def check(self, n: int, time_windows: bool, aspect: float) -> None:
        """
        Enforce the inequalities every run depends on

        Args:
            n: Total subtree measure of the tree
            time_windows: Whether the instance has non-unit windows
            aspect: Aspect ratio Δ of the leaf metric

        Raises:
            ParamViolation: Naming the first violated inequality
        """
        if self.delta_prime - 2 * self.delta * n <= 0:
            raise ParamViolation(
                "δ′ − 2δn > 0",
                f"δ′={self.delta_prime!r}, δ={self.delta!r}, n={n}",
            )
        if self.delta < 4 * self.gamma:
            raise ParamViolation(
                "δ ≥ 4γ",
                f"δ={self.delta!r}, γ={self.gamma!r}",
            )
        if time_windows and self.delta_prime < self.gamma * n * aspect:
            raise ParamViolation(
                "δ′ ≥ γnΔ",
                f"δ′={self.delta_prime!r}, γ={self.gamma!r}, n={n}, Δ={aspect!r}",
            )

    def m_value(self, height: int, lam: float, k: int, time_windows: bool) -> float:
        """M from the bound on non-solitary timesteps per interval"""
        if self.m_override is not None:
            return self.m_override
        if time_windows:
            return 5 * height * lam ** (2 * height) * k / (2 * self.gamma) + 1
        return 5 * height * lam ** height * k / (4 * self.gamma) + 1


class Instance(BaseModel):
    """
    A complete simulation input: tree, servers, requests and parameters
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tree: Hst = Field(..., description="The tree as written in the instance (no dummies)")
    hst: Hst = Field(..., description="The tree with 2k dummy leaves attached")
    k: int = Field(..., ge=1, description="Number of servers")
    requests: List[Request] = Field(default_factory=list, description="Requests by arrival")
    params: ParamSet = Field(..., description="Validated parameters")
    overrides: Dict[str, str] = Field(
        default_factory=dict,
        description="Parameter lines exactly as given in the file"
    )

    @property
    def is_time_windows(self) -> bool:
        return any(not request.is_unit_window for request in self.requests)

    @property
    def n(self) -> int:
        return self.hst.total_measure(self.params.subtree_measure, self.params.count_dummies_in_n)

    def m_value(self, time_windows: Optional[bool] = None) -> float:
        windows = self.is_time_windows if time_windows is None else time_windows
        return self.params.m_value(self.hst.height, self.hst.lam, self.k, windows)

    def event_times(self) -> List[int]:
        """All arrival and deadline times, sorted"""
        return sorted({t for request in self.requests for t in (request.b, request.e)})


# Custom Exceptions

class InstanceError(Exception):
    """Base exception for instance loading errors"""
    pass


class ParseError(InstanceError):
    """Raised when instance text does not follow the grammar"""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParamViolation(InstanceError):
    """Raised when a parameter inequality fails"""

    def __init__(self, inequality: str, detail: str = ""):
        super().__init__(f"parameter inequality {inequality} violated ({detail})")
        self.inequality = inequality


class DuplicateTime(InstanceError):
    """Raised when two arrival/deadline times coincide"""
    pass


class DummyRequest(InstanceError):
    """Raised when a request targets a dummy leaf or a non-leaf"""
    pass
