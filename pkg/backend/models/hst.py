"""
Hierarchically separated tree models
"""
from pydantic import BaseModel, ConfigDict, Field
from typing import Dict, Iterable, List, Optional, Tuple


class HstNode(BaseModel):
    """
    One vertex of a λ-HST
    """
    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1, description="Node identifier")
    parent: Optional[str] = Field(default=None, description="Parent identifier, None for the root")
    level: int = Field(..., ge=0, description="Level (leaves at 0, root at H)")
    edge_cost: Optional[float] = Field(
        default=None,
        description="Cost λ^level of the edge to the parent, None for the root"
    )
    leaf_count: int = Field(..., ge=1, description="Number of leaves in the subtree (n_v)")
    size: int = Field(..., ge=1, description="Number of nodes in the subtree (|T_v|)")
    is_dummy: bool = Field(default=False, description="Part of a dummy-leaf chain")


class Hst:
    """
    Immutable rooted λ-HST with the lookups the simulators need.

    Built through services.hst_builder.build_hst, which validates the input.
    """

    def __init__(self, nodes: Dict[str, HstNode], root: str, lam: float):
        self.nodes = nodes
        self.root = root
        self.lam = lam
        self.height = nodes[root].level

        children: Dict[str, List[str]] = {node_id: [] for node_id in nodes}
        for node in nodes.values():
            if node.parent is not None:
                children[node.parent].append(node.id)
        self._children = {node_id: tuple(sorted(kids)) for node_id, kids in children.items()}

        self.leaves: Tuple[str, ...] = tuple(
            sorted(node_id for node_id, kids in self._children.items() if not kids)
        )
        self.real_leaves = tuple(leaf for leaf in self.leaves if not nodes[leaf].is_dummy)
        self.dummy_leaves = tuple(leaf for leaf in self.leaves if nodes[leaf].is_dummy)

        self._paths: Dict[str, Tuple[str, ...]] = {}
        for node_id in nodes:
            path = [node_id]
            while nodes[path[-1]].parent is not None:
                path.append(nodes[path[-1]].parent)
            self._paths[node_id] = tuple(path)

        below: Dict[str, List[str]] = {node_id: [] for node_id in nodes}
        for leaf in self.leaves:
            for ancestor in self._paths[leaf]:
                below[ancestor].append(leaf)
        self._leaves_below = {node_id: tuple(sorted(ls)) for node_id, ls in below.items()}

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hst):
            return NotImplemented
        return self.lam == other.lam and self.records(True) == other.records(True)

    def __repr__(self) -> str:
        return f"Hst(root={self.root!r}, H={self.height}, λ={self.lam!r}, nodes={len(self.nodes)})"

    @property
    def n(self) -> int:
        """Leaf count, dummy leaves included"""
        return len(self.leaves)

    def node(self, node_id: str) -> HstNode:
        if node_id not in self.nodes:
            raise UnknownNode(f"Unknown node {node_id!r}")
        return self.nodes[node_id]

    def parent(self, node_id: str) -> Optional[str]:
        return self.node(node_id).parent

    def level(self, node_id: str) -> int:
        return self.node(node_id).level

    def children(self, node_id: str) -> Tuple[str, ...]:
        self.node(node_id)
        return self._children[node_id]

    def cost(self, node_id: str) -> float:
        """Edge cost c_v; the root is given λ^H so level thresholds stay uniform"""
        node = self.node(node_id)
        if node.edge_cost is None:
            return self.lam ** node.level
        return node.edge_cost

    def path_to_root(self, node_id: str) -> Tuple[str, ...]:
        self.node(node_id)
        return self._paths[node_id]

    def leaves_below(self, node_id: str) -> Tuple[str, ...]:
        self.node(node_id)
        return self._leaves_below[node_id]

    def is_ancestor(self, ancestor: str, node_id: str) -> bool:
        """True when ancestor lies on the path from node_id to the root (inclusive)"""
        return ancestor in self.path_to_root(node_id)

    def child_toward(self, node_id: str, descendant: str) -> str:
        """Child of node_id whose subtree contains descendant"""
        path = self.path_to_root(descendant)
        index = path.index(node_id)
        if index == 0:
            raise UnknownNode(f"{descendant!r} is not strictly below {node_id!r}")
        return path[index - 1]

    def lca(self, u: str, v: str) -> str:
        ancestors = set(self.path_to_root(u))
        for node_id in self.path_to_root(v):
            if node_id in ancestors:
                return node_id
        raise MalformedTree(f"Nodes {u!r} and {v!r} share no ancestor")

    def upward_cost(self, node_id: str, ancestor: str) -> float:
        """Sum of edge costs from node_id up to (excluding) ancestor"""
        total = 0.0
        for step in self.path_to_root(node_id):
            if step == ancestor:
                return total
            total += self.cost(step)
        raise UnknownNode(f"{ancestor!r} is not an ancestor of {node_id!r}")

    def distance(self, u: str, v: str) -> float:
        top = self.lca(u, v)
        return self.upward_cost(u, top) + self.upward_cost(v, top)

    def measure(self, node_id: str, mode: str = "nodes") -> int:
        """Subtree weight used in the δ-terms of truncated constraints"""
        node = self.node(node_id)
        return node.size if mode == "nodes" else node.leaf_count

    def total_measure(self, mode: str = "nodes", count_dummies: bool = True) -> int:
        total = self.measure(self.root, mode)
        if not count_dummies:
            total -= sum(self.measure(node_id, mode) for node_id in self.dummy_tops())
        return total

    def dummy_tops(self) -> List[str]:
        """Root children that start a dummy chain"""
        return [child for child in self.children(self.root) if self.nodes[child].is_dummy]

    def aspect_ratio(self) -> float:
        """Δ over pairs of distinct leaves (1.0 with fewer than two leaves)"""
        distances = [
            self.distance(a, b)
            for i, a in enumerate(self.leaves)
            for b in self.leaves[i + 1:]
        ]
        if not distances:
            return 1.0
        return max(distances) / min(distances)

    def records(self, include_dummies: bool = False) -> List[Tuple[str, Optional[str], int]]:
        """(id, parent, level) triples, parents before children"""
        ordered = sorted(
            self.nodes.values(),
            key=lambda node: (-node.level, node.id),
        )
        return [
            (node.id, node.parent, node.level)
            for node in ordered
            if include_dummies or not node.is_dummy
        ]

    def iter_internal(self) -> Iterable[str]:
        return (node_id for node_id, kids in sorted(self._children.items()) if kids)


# Custom Exceptions

class HstError(Exception):
    """Base exception for tree construction errors"""
    pass


class MalformedTree(HstError):
    """Raised when the node list does not describe a rooted tree with consistent levels"""
    pass


class LambdaTooSmall(HstError):
    """Raised when λ < 10·H"""
    pass


class UnknownNode(HstError):
    """Raised when a node identifier is not part of the tree"""
    pass


class DegenerateMetric(HstError):
    """Raised when a metric has duplicate points or zero off-diagonal distances"""
    pass
