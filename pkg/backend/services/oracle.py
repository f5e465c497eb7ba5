"""
Offline oracles: time-expanded min-cost flow for k-server, brute force over service
times for time windows, root-constraint verification and the restricted gather flow
"""
import itertools
import logging
from fractions import Fraction
from math import lcm
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from config import settings
from models.hst import Hst
from models.instance import Instance, Timestep
from models.lp import TruncatedConstraint
from models.oracle import (
    GraphTooLarge,
    Movement,
    OracleCertificate,
    RootCheckReport,
    RootViolation,
    TooManyCombinations,
)
from models.run import InfeasibleGather

logger = logging.getLogger(__name__)

SOURCE = "source"
SINK = "sink"

# (crossing timestep, leaves that must hold a server during the slot)
Slot = Tuple[Timestep, Set[str]]


def integer_costs(hst: Hst) -> Tuple[Dict[str, int], int]:
    """
    Edge costs scaled to integers with one common denominator

    Returns:
        ({node: scaled cost}, scale)
    """
    exact = {
        node_id: Fraction(hst.cost(node_id))
        for node_id in hst.nodes
        if node_id != hst.root
    }
    scale = lcm(*(value.denominator for value in exact.values())) if exact else 1
    return {node_id: int(value * scale) for node_id, value in exact.items()}, scale


def start_slots(hst: Hst) -> List[Slot]:
    """Dummy leaves visited one by one at pseudo-times (0, 1), (0, 2), ..."""
    return [(Timestep(0, index), {dummy}) for index, dummy in enumerate(hst.dummy_leaves, start=1)]


def solve_slots(hst: Hst, k: int, slots: Sequence[Slot]) -> Tuple[float, List[Movement], int]:
    """
    Min-cost flow on the time-expanded tree

    Layer s holds every tree node; up-arcs cost c_v, down-arcs and waiting arcs are free.
    Each leaf of slot s sends one unit into a serve node at layer s and gets it back
    from a paired emit node at layer s + 1, which forces a server through it.
    The k units enter at any leaf of layer 0.

    Returns:
        (optimal cost, upward crossings, graph size)

    Raises:
        GraphTooLarge: When the graph would exceed ORACLE_NODE_CAP nodes
        networkx.NetworkXUnfeasible: When a slot asks for more than k leaves
    """
    layers = len(slots) + 1
    size = len(hst.nodes) * layers + 2
    if size > settings.ORACLE_NODE_CAP:
        raise GraphTooLarge(f"Time-expanded graph needs {size} nodes (cap {settings.ORACLE_NODE_CAP})")

    costs, scale = integer_costs(hst)
    graph = nx.DiGraph()
    graph.add_node(SOURCE, demand=-k)
    graph.add_node(SINK, demand=k)
    for s in range(layers):
        for node_id in hst.nodes:
            graph.add_node((node_id, s), demand=0)
    for s in range(layers):
        for node_id, cost in costs.items():
            parent = hst.parent(node_id)
            graph.add_edge((node_id, s), (parent, s), weight=cost)
            graph.add_edge((parent, s), (node_id, s), weight=0)
        if s + 1 < layers:
            for node_id in hst.nodes:
                graph.add_edge((node_id, s), (node_id, s + 1), weight=0)
    for leaf in hst.leaves:
        graph.add_edge(SOURCE, (leaf, 0), weight=0)
        graph.add_edge((leaf, layers - 1), SINK, weight=0)
    for s, (_, leaves) in enumerate(slots):
        for leaf in leaves:
            graph.add_node(("serve", leaf, s), demand=1)
            graph.add_node(("emit", leaf, s), demand=-1)
            graph.add_edge((leaf, s), ("serve", leaf, s), weight=0)
            graph.add_edge(("emit", leaf, s), (leaf, s + 1), weight=0)

    flow_cost, flow = nx.network_simplex(graph)

    movements: List[Movement] = []
    for s, (label, _) in enumerate(slots):
        for node_id in costs:
            amount = flow[(node_id, s)].get((hst.parent(node_id), s), 0)
            if amount > 0:
                movements.append(Movement(node=node_id, q=label.q, tick=label.tick, amount=float(amount)))
    return flow_cost / scale, movements, size


def opt_kserver(instance: Instance, with_start: bool = False) -> OracleCertificate:
    """
    Exact offline k-server optimum, serving each request at its arrival time

    Args:
        instance: Instance; only arrival times are used
        with_start: Visit every dummy leaf before the first request

    Returns:
        OracleCertificate with the optimal upward crossings
    """
    slots = start_slots(instance.hst) if with_start else []
    slots += [(Timestep(r.b, 1), {r.leaf}) for r in instance.requests]
    cost, movements, size = solve_slots(instance.hst, instance.k, slots)
    logger.info(f"Flow oracle: opt={cost:.6g} over {size} graph nodes (with_start={with_start})")
    return OracleCertificate(
        opt_cost=cost,
        method="flow",
        with_start=with_start,
        graph_nodes=size,
        service_times=[r.b for r in instance.requests],
        movements=movements,
    )


def opt_tw_bruteforce(
    instance: Instance,
    cap: Optional[int] = None,
    with_start: bool = False,
) -> OracleCertificate:
    """
    Offline optimum with time windows by enumerating service times

    Candidate service times of a request are the event times inside its window.
    Assignments that put more than k distinct leaves at one time are skipped.

    Raises:
        TooManyCombinations: When the number of assignments exceeds the cap
    """
    cap = settings.BRUTE_FORCE_CAP if cap is None else cap
    times = instance.event_times()
    candidates = [[t for t in times if r.b <= t <= r.e] for r in instance.requests]
    total = int(np.prod([len(c) for c in candidates], dtype=np.int64)) if candidates else 1
    if total > cap:
        raise TooManyCombinations(f"{total} service-time assignments exceed the cap of {cap}")

    prefix = start_slots(instance.hst) if with_start else []
    best: Optional[Tuple[float, List[Movement], int, Tuple[int, ...]]] = None
    for assignment in itertools.product(*candidates):
        grouped: Dict[int, Set[str]] = {}
        for request, t in zip(instance.requests, assignment):
            grouped.setdefault(t, set()).add(request.leaf)
        if any(len(leaves) > instance.k for leaves in grouped.values()):
            continue
        slots = prefix + [(Timestep(t, 1), grouped[t]) for t in sorted(grouped)]
        cost, movements, size = solve_slots(instance.hst, instance.k, slots)
        if best is None or cost < best[0]:
            best = (cost, movements, size, assignment)

    if best is None:
        raise TooManyCombinations("No service-time assignment fits k servers")
    cost, movements, size, assignment = best
    logger.info(f"Brute-force oracle: opt={cost:.6g} after {total} assignments")
    return OracleCertificate(
        opt_cost=cost,
        method="brute",
        with_start=with_start,
        graph_nodes=size,
        assignments=total,
        service_times=list(assignment),
        movements=movements,
    )


def _timestep_key(tau: Timestep) -> int:
    return (tau[0] << 32) + tau[1]


def verify_root_constraints(
    movements: Iterable[Movement],
    constraints: Iterable[TruncatedConstraint],
) -> RootCheckReport:
    """
    Evaluate every non-⊥ constraint on an offline solution's upward crossings

    The LHS of a term (u, lo, hi) is the mass that crossed the edge above u in (lo, hi].

    Returns:
        RootCheckReport listing constraints with LHS < RHS
    """
    per_node: Dict[str, List[Tuple[int, float]]] = {}
    for move in movements:
        per_node.setdefault(move.node, []).append((_timestep_key(Timestep(move.q, move.tick)), move.amount))
    prefix: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    for node_id, items in per_node.items():
        items.sort()
        keys = np.array([key for key, _ in items], dtype=np.int64)
        sums = np.concatenate(([0.0], np.cumsum([amount for _, amount in items])))
        prefix[node_id] = (keys, sums)

    def crossed(node_id: str, lo: Timestep, hi: Timestep) -> float:
        if node_id not in prefix or hi <= lo:
            return 0.0
        keys, sums = prefix[node_id]
        start, stop = np.searchsorted(keys, [_timestep_key(lo), _timestep_key(hi)], side="right")
        return float(sums[stop] - sums[start])

    report = RootCheckReport()
    for constraint in constraints:
        if constraint.is_bot:
            continue
        lhs = sum(crossed(u, lo, hi) for u, lo, hi in constraint.lhs_terms())
        slack = lhs - constraint.rhs
        report.checked += 1
        report.min_slack = slack if report.min_slack is None else min(report.min_slack, slack)
        if slack < -settings.tolerance(constraint.rhs):
            report.violations.append(RootViolation(cid=constraint.cid, lhs=lhs, rhs=constraint.rhs))
    if report.violations:
        logger.warning(f"⚠️ {len(report.violations)} of {report.checked} root constraints violated")
    return report


def gather_flow_cost(
    hst: Hst,
    masses: Dict[str, float],
    leaf: str,
    deficit: float,
    floor: float,
    resolution: int = 10 ** 9,
) -> float:
    """
    Min-cost flow bringing deficit mass to leaf, each donor keeping at least floor

    Masses are discretised at the given resolution.

    Raises:
        InfeasibleGather: When the donors cannot cover the deficit
    """
    if deficit <= 0:
        return 0.0
    costs, scale = integer_costs(hst)
    need = int(round(deficit * resolution))
    graph = nx.DiGraph()
    graph.add_node(SOURCE, demand=-need)
    for node_id in hst.nodes:
        graph.add_node(node_id, demand=0)
    graph.nodes[leaf]["demand"] = need
    for node_id, cost in costs.items():
        parent = hst.parent(node_id)
        graph.add_edge(node_id, parent, weight=cost)
        graph.add_edge(parent, node_id, weight=cost)
    available = 0
    for other in hst.leaves:
        if other == leaf:
            continue
        capacity = int(max(0.0, masses[other] - floor) * resolution)
        if capacity > 0:
            graph.add_edge(SOURCE, other, weight=0, capacity=capacity)
            available += capacity
    if available < need:
        raise InfeasibleGather(f"{leaf!r} cannot gather {deficit!r}; donors hold {available / resolution!r}")
    flow_cost, _ = nx.network_simplex(graph)
    return flow_cost / (scale * resolution)
