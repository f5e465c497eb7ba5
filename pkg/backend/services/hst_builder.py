"""
HST construction, validation and dummy-leaf setup
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from models.hst import (
    Hst,
    HstNode,
    MalformedTree,
    LambdaTooSmall,
)

logger = logging.getLogger(__name__)

NodeRecord = Tuple[str, Optional[str], int]


def build_hst(
    spec: Sequence[NodeRecord],
    lam: float,
    enforce_separation: bool = True,
    dummies: Sequence[str] = (),
) -> Hst:
    """
    Validate a node list and build the tree

    Args:
        spec: (id, parent or None, level) triples in any order
        lam: Separation factor λ
        enforce_separation: Reject trees with λ < 10·H
        dummies: Node ids that belong to dummy chains

    Returns:
        Hst with edge costs λ^level and subtree counts

    Raises:
        MalformedTree: On duplicate ids, orphans, cycles, several roots or level mismatches
        LambdaTooSmall: When enforce_separation holds and λ < 10·H
    """
    if lam <= 1:
        raise MalformedTree(f"λ must exceed 1, got {lam}")

    parents: Dict[str, Optional[str]] = {}
    levels: Dict[str, int] = {}
    for node_id, parent, level in spec:
        if not node_id or any(ch.isspace() for ch in node_id):
            raise MalformedTree(f"Invalid node id {node_id!r}")
        if node_id in parents:
            raise MalformedTree(f"Duplicate node id {node_id!r}")
        if level < 0:
            raise MalformedTree(f"Node {node_id!r} has negative level {level}")
        parents[node_id] = parent
        levels[node_id] = level

    roots = [node_id for node_id, parent in parents.items() if parent is None]
    if len(roots) != 1:
        raise MalformedTree(f"Expected exactly one root, found {len(roots)}")
    root = roots[0]

    children: Dict[str, List[str]] = {node_id: [] for node_id in parents}
    for node_id, parent in parents.items():
        if parent is None:
            continue
        if parent not in parents:
            raise MalformedTree(f"Node {node_id!r} has unknown parent {parent!r}")
        if levels[parent] != levels[node_id] + 1:
            raise MalformedTree(
                f"Level mismatch on edge {node_id!r}->{parent!r}: "
                f"{levels[node_id]} vs {levels[parent]}"
            )
        children[parent].append(node_id)

    # Levels strictly increase towards the root, so only disconnected parts can hide cycles
    reached = {root}
    stack = [root]
    while stack:
        for child in children[stack.pop()]:
            reached.add(child)
            stack.append(child)
    if len(reached) != len(parents):
        raise MalformedTree(f"{len(parents) - len(reached)} node(s) not connected to root {root!r}")

    for node_id, kids in children.items():
        if not kids and levels[node_id] != 0:
            raise MalformedTree(f"Leaf {node_id!r} sits at level {levels[node_id]}, expected 0")

    height = levels[root]
    if height < 1:
        raise MalformedTree("A tree needs at least one edge (root level ≥ 1)")
    if lam < 10 * height:
        if enforce_separation:
            raise LambdaTooSmall(f"λ={lam} is below 10·H={10 * height}")
        logger.warning(f"λ={lam} is below 10·H={10 * height}; tree accepted without separation check")

    leaf_count: Dict[str, int] = {}
    size: Dict[str, int] = {}
    for node_id in sorted(parents, key=lambda x: levels[x]):
        kids = children[node_id]
        leaf_count[node_id] = sum(leaf_count[kid] for kid in kids) if kids else 1
        size[node_id] = 1 + sum(size[kid] for kid in kids)

    dummy_set = set(dummies)
    nodes = {
        node_id: HstNode(
            id=node_id,
            parent=parents[node_id],
            level=levels[node_id],
            edge_cost=None if parents[node_id] is None else lam ** levels[node_id],
            leaf_count=leaf_count[node_id],
            size=size[node_id],
            is_dummy=node_id in dummy_set,
        )
        for node_id in parents
    }
    return Hst(nodes, root, lam)


def add_dummy_leaves(hst: Hst, k: int) -> Hst:
    """
    Attach 2k dummy leaves under the root

    Each dummy hangs from a chain of single-child nodes so that it sits at level 0
    and every edge keeps cost λ^level.

    Args:
        hst: Tree without dummies
        k: Number of servers

    Returns:
        New tree including the dummy chains
    """
    if k < 1:
        raise MalformedTree(f"k must be at least 1, got {k}")
    records = hst.records(include_dummies=True)
    dummies = [node.id for node in hst.nodes.values() if node.is_dummy]
    offset = len(hst.dummy_leaves)
    for index in range(offset, offset + 2 * k):
        above = hst.root
        for level in range(hst.height - 1, 0, -1):
            chain_id = f"dummy{index}@{level}"
            records.append((chain_id, above, level))
            dummies.append(chain_id)
            above = chain_id
        leaf_id = f"dummy{index}"
        records.append((leaf_id, above, 0))
        dummies.append(leaf_id)
    return build_hst(records, hst.lam, enforce_separation=False, dummies=dummies)


def dummy_chain(hst: Hst, dummy_leaf: str) -> Tuple[str, ...]:
    """Nodes from a dummy leaf up to (excluding) the root"""
    return hst.path_to_root(dummy_leaf)[:-1]


def tree_distance(hst: Hst, u: str, v: str) -> float:
    """Sum of edge costs on the tree path between u and v"""
    return hst.distance(u, v)


def balanced_hst(leaves: int, height: int, lam: float) -> Hst:
    """
    Near-balanced tree with the given number of leaves and height

    The branching factor is the smallest b with b^height ≥ leaves; subtrees are
    filled left to right and empty branches are dropped.
    """
    if leaves < 1 or height < 1:
        raise MalformedTree("Need at least one leaf and height ≥ 1")
    branching = 1
    while branching ** height < leaves:
        branching += 1

    records: List[NodeRecord] = [("r", None, height)]
    frontier = [("r", leaves)]
    for level in range(height - 1, -1, -1):
        next_frontier = []
        for parent, count in frontier:
            capacity = branching ** level
            index = 0
            while count > 0:
                take = min(count, capacity)
                node_id = f"{parent}.{index}" if level > 0 else f"l{len(records)}"
                records.append((node_id, parent, level))
                next_frontier.append((node_id, take))
                count -= take
                index += 1
        frontier = next_frontier

    # Leaf names in left-to-right order
    leaf_ids = [node_id for node_id, _, level in records if level == 0]
    renamed = {old: f"l{i}" for i, old in enumerate(leaf_ids)}
    records = [(renamed.get(a, a), b, c) for a, b, c in records]
    return build_hst(records, lam)
