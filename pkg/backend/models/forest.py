"""
Charging forest and piggyback plan models for the time-windows simulator
"""
from pydantic import BaseModel, Field
from typing import Dict, List, Optional, Tuple

from models.run import RunError

# (leaf, b, e) of the outstanding request with the earliest deadline below a node
Annotation = Tuple[str, int, int]
ForestKey = Tuple[str, int]


class ForestNode:
    """A (tree node, time) vertex of a charging forest"""

    __slots__ = ("w", "q", "annotation", "children", "parent")

    def __init__(self, w: str, q: int, annotation: Optional[Annotation]):
        self.w = w
        self.q = q
        self.annotation = annotation
        self.children: List[ForestKey] = []
        self.parent: Optional[ForestKey] = None

    @property
    def key(self) -> ForestKey:
        return (self.w, self.q)


class ChargingForest:
    """
    Per-vertex forest of (node, time) tuples.

    Edges always point from a newer vertex to vertices created at an earlier
    time, so a vertex created at q is a root at time q.
    """

    def __init__(self, owner: str):
        self.owner = owner
        self.nodes: Dict[ForestKey, ForestNode] = {}
        self.occurrences: Dict[str, List[int]] = {}
        self.spawned: Dict[ForestKey, Tuple[str, ...]] = {}

    def __contains__(self, key: object) -> bool:
        return key in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def add_node(self, w: str, q: int, annotation: Optional[Annotation]) -> ForestNode:
        if (w, q) in self.nodes:
            raise DuplicateVertex(f"({w}, {q}) already in the charging forest of {self.owner}")
        node = ForestNode(w, q, annotation)
        self.nodes[(w, q)] = node
        self.occurrences.setdefault(w, []).append(q)
        return node

    def previous_time(self, w: str, q: int) -> Optional[int]:
        """Latest q'' < q with (w, q'') in the forest"""
        earlier = [t for t in self.occurrences.get(w, ()) if t < q]
        return max(earlier) if earlier else None

    def add_edge(self, parent: ForestKey, child: ForestKey) -> None:
        self.nodes[parent].children.append(child)
        self.nodes[child].parent = parent

    def record_spawn(self, w: str, q: int, spawned: Tuple[str, ...]) -> None:
        self.spawned[(w, q)] = spawned

    def descendants(self, key: ForestKey) -> List[ForestNode]:
        """Vertices of the tree hanging from key, key included"""
        found: List[ForestNode] = []
        stack = [key]
        while stack:
            node = self.nodes[stack.pop()]
            found.append(node)
            stack.extend(node.children)
        return found

    def tree_leaves(self, key: ForestKey) -> List[ForestNode]:
        return [node for node in self.descendants(key) if not node.children]

    def is_singleton(self, key: ForestKey) -> bool:
        return not self.nodes[key].children


class PiggybackPlan(BaseModel):
    """
    Output of BuildTree at one critical time
    """
    q: int = Field(..., description="Critical time")
    cost: float = Field(..., ge=0, description="Estimated gather cost for the critical leaf")
    logcost: int = Field(..., ge=0, description="⌊log_λ(2λ·cost)⌋ clamped to [0, H]")
    z_q: List[str] = Field(default_factory=list, description="Backbone prefix v0..v_logcost")
    trees: Dict[str, List[str]] = Field(
        default_factory=dict,
        description="Node set of F_{v,q} per backbone node"
    )
    tree_costs: Dict[str, float] = Field(default_factory=dict, description="Edge cost of each F tree")
    served: List[int] = Field(default_factory=list, description="Request ids served by the tour")

    @property
    def total_cost(self) -> float:
        return sum(self.tree_costs.values())


# Custom Exceptions

class DuplicateVertex(RunError):
    """Raised when a (node, time) vertex is added to a charging forest twice"""
    pass
