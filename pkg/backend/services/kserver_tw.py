"""
Fractional k-server with time windows: critical requests, charging forests,
SimpleUpdate with ξ budgets, FullUpdate with top-up, and piggyback tours
"""
import logging
from collections import deque
from typing import Dict, List, Optional, Sequence, Set, Tuple

from config import settings
from models.forest import Annotation, ChargingForest, PiggybackPlan
from models.hst import Hst
from models.instance import Instance, Request, Timestep
from models.lp import SOURCE_SIMPLE, TruncatedConstraint
from models.run import InfeasibleGather, InvariantBreach, RequestSummary
from services.kserver import KServerSimulator, RunState
from services.trace import Listener

logger = logging.getLogger(__name__)


def gather_cost(
    hst: Hst,
    masses: Dict[str, float],
    leaf: str,
    deficit: float,
    floor: float,
) -> float:
    """
    Cheapest way to bring deficit mass to leaf keeping every donor at ≥ floor

    Donors are taken greedily by tree distance (ties by id), which is optimal on a tree.

    Raises:
        InfeasibleGather: When the donors hold less than deficit above floor
    """
    if deficit <= 0:
        return 0.0
    donors = sorted(
        (hst.distance(leaf, other), other) for other in hst.leaves if other != leaf
    )
    remaining = deficit
    cost = 0.0
    for distance, other in donors:
        take = min(remaining, max(0.0, masses[other] - floor))
        if take <= 0:
            continue
        cost += take * distance
        remaining -= take
        if remaining <= 0:
            return cost
    if remaining > settings.tolerance(deficit):
        raise InfeasibleGather(f"{leaf!r} is short by {remaining!r} after draining every donor")
    return cost


def log_cost(cost: float, lam: float, height: int) -> int:
    """⌊log_λ(2λ·cost)⌋ clamped to [0, H], computed on powers to avoid log rounding"""
    scaled = 2 * lam * cost
    index = 0
    while index < height and lam ** (index + 1) <= scaled:
        index += 1
    return index


def forest_cost_bound(hst: Hst, node_id: str) -> float:
    """H²·c_v with one (1 + 1/λ) factor per level for the path that crosses the threshold"""
    return hst.height ** 2 * hst.cost(node_id) * (1 + 1 / hst.lam) ** hst.height


class TimeWindowSimulator(KServerSimulator):
    """
    Serves requests with arbitrary windows [b, e], acting only when a request becomes critical

    Args:
        instance: Validated instance
        listener: Optional per-event callback
    """

    algorithm = "tw"

    def __init__(self, instance: Instance, listener: Optional[Listener] = None):
        super().__init__(instance, listener)
        self.forests: Dict[str, ChargingForest] = {}
        self.outstanding: Dict[int, Request] = {}
        self.peak: Dict[int, float] = {}
        self.piggybacked: Set[int] = set()
        self.rows: Dict[int, RequestSummary] = {}
        self._q = 0
        self._logcost = 0
        self._request: Optional[Request] = None
        self._xi: Dict[Tuple[int, int], float] = {}

    def forest(self, node_id: str) -> ChargingForest:
        if node_id not in self.forests:
            self.forests[node_id] = ChargingForest(node_id)
        return self.forests[node_id]

    @property
    def saturation_mark(self) -> float:
        return 1.0 - 2 * self.params.delta_prime

    def run(self) -> RunState:
        """
        Sweep arrival and deadline times in order

        Returns:
            RunState with the trace and one summary per request
        """
        self._start()
        schedule: List[Tuple[int, str, Request]] = []
        for request in self.instance.requests:
            schedule.append((request.b, "arrival", request))
            schedule.append((request.e, "deadline", request))
        schedule.sort(key=lambda item: item[0])

        for time, kind, request in schedule:
            if kind == "arrival":
                self.arrive(request)
            else:
                self.deadline(request, time)

        self.state.summaries = [self.rows[r.rid] for r in self.instance.requests]
        self._finish()
        return self.state

    def arrive(self, request: Request) -> None:
        mass = self.engine.ledger.mass[request.leaf]
        self.outstanding[request.rid] = request
        self.peak[request.rid] = mass
        self.trace.emit(
            "request_started", rid=request.rid, leaf=request.leaf, b=request.b, e=request.e, q=request.b, mass=mass
        )
        self.rows[request.rid] = RequestSummary(
            rid=request.rid, leaf=request.leaf, b=request.b, e=request.e, peak_mass=mass
        )

    def is_served(self, rid: int) -> bool:
        return rid in self.piggybacked or self.peak[rid] >= self.saturation_mark

    def is_critical(self, request: Request, q: int) -> bool:
        """Deadline reached, leaf never held 1 − 2δ′ inside the window, not piggybacked"""
        if q != request.e:
            return False
        return not self.is_served(request.rid)

    def pending(self, q: int) -> List[Request]:
        """Arrived, unserved requests whose deadline is not before q"""
        return [
            r for r in self.outstanding.values()
            if r.b <= q <= r.e and not self.is_served(r.rid)
        ]

    def deadline(self, request: Request, q: int) -> None:
        row = self.rows[request.rid]
        if not self.is_critical(request, q):
            self.outstanding.pop(request.rid, None)
            self.trace.emit(
                "request_done",
                rid=request.rid,
                leaf=request.leaf,
                q=q,
                mass=self.engine.ledger.mass[request.leaf],
                peak=self.peak[request.rid],
                critical=False,
                piggybacked=request.rid in self.piggybacked,
                iterations=0,
            )
            self.rows[request.rid] = row.model_copy(
                update={"peak_mass": self.peak[request.rid], "piggybacked": request.rid in self.piggybacked}
            )
            return

        self.trace.emit(
            "critical", rid=request.rid, leaf=request.leaf, q=q, b=request.b, peak=self.peak[request.rid]
        )
        cost_before = self.state.movement_cost
        dual_before = self.state.root_dual
        plan = self.build_tree(q, request)

        self._q = q
        self._logcost = plan.logcost
        self._request = request
        self._xi = {}
        iterations = self.saturate(request.leaf, q, request.rid)

        ledger = self.engine.ledger
        for other in self.outstanding.values():
            if other.leaf == request.leaf:
                self.peak[other.rid] = max(self.peak[other.rid], ledger.mass[request.leaf])

        piggyback = self.piggyback_serve(plan, q)
        self.outstanding.pop(request.rid, None)
        self.trace.emit(
            "request_done",
            rid=request.rid,
            leaf=request.leaf,
            q=q,
            mass=ledger.mass[request.leaf],
            peak=self.peak[request.rid],
            critical=True,
            piggybacked=False,
            iterations=iterations,
            cost=plan.cost,
            xi=[[i, istar, total] for (i, istar), total in sorted(self._xi.items())],
        )
        self.rows[request.rid] = row.model_copy(
            update={
                "timesteps": iterations,
                "movement_cost": self.state.movement_cost - cost_before,
                "piggyback_cost": piggyback,
                "dual_gained": self.state.root_dual - dual_before,
                "critical": True,
                "peak_mass": self.peak[request.rid],
            }
        )

    # BuildTree and its helpers

    def cost_estimate(self, q: int, leaf: str) -> Tuple[float, int]:
        """
        Gather cost to lift leaf to 1 − δ′ keeping donors at ≥ δ − γ, and its logcost
        """
        ledger = self.engine.ledger
        deficit = 1.0 - self.params.delta_prime - ledger.mass[leaf]
        cost = gather_cost(self.hst, ledger.mass, leaf, deficit, self.params.delta - self.params.gamma)
        return cost, log_cost(cost, self.hst.lam, self.hst.height)

    def earliest_leaf_req(self, w: str, q: int) -> Optional[Annotation]:
        below = set(self.hst.leaves_below(w))
        candidates = [r for r in self.pending(q) if r.leaf in below]
        if not candidates:
            return None
        best = min(candidates, key=lambda r: r.e)
        return (best.leaf, best.b, best.e)

    def find_leaves(self, q: int, w: str) -> Tuple[Set[str], Tuple[str, ...]]:
        """
        Add leaf-to-w paths in EDF order until some level below w costs at least c_w

        Returns:
            (G, S): the subtree built so far and the spawned level (empty when none filled)
        """
        hst = self.hst
        below = set(hst.leaves_below(w))
        deadlines: Dict[str, int] = {}
        for r in self.pending(q):
            if r.leaf in below:
                deadlines[r.leaf] = min(deadlines.get(r.leaf, r.e), r.e)
        order = sorted(deadlines, key=lambda leaf: deadlines[leaf])

        top = hst.level(w)
        threshold = hst.cost(w) - settings.tolerance(hst.cost(w))
        graph: Set[str] = {w}
        level_cost: Dict[int, float] = {}
        for leaf in order:
            for node_id in hst.path_to_root(leaf):
                if node_id == w:
                    break
                if node_id not in graph:
                    graph.add(node_id)
                    level = hst.level(node_id)
                    level_cost[level] = level_cost.get(level, 0.0) + hst.cost(node_id)
            for level in range(top - 1, -1, -1):
                if level_cost.get(level, 0.0) >= threshold:
                    spawned = tuple(sorted(x for x in graph if hst.level(x) == level))
                    return graph, spawned
        return graph, ()

    def build_witness(self, q: int, w: str, v: str) -> None:
        forest = self.forest(v)
        annotation = self.earliest_leaf_req(w, q)
        previous = forest.previous_time(w, q)
        forest.add_node(w, q, annotation)
        self.trace.emit(
            "witness_node", owner=v, w=w, q=q, annotation=list(annotation) if annotation else None
        )
        if previous is None or annotation is None:
            return
        _, b, e = annotation
        if b <= previous <= e:
            for child in forest.spawned.get((w, previous), ()):
                forest.add_edge((w, q), (child, previous))
                self.trace.emit("witness_edge", owner=v, parent=[w, q], child=[child, previous])

    def build_tree(self, q: int, request: Request) -> PiggybackPlan:
        """
        Pick Z_q from the gather cost and grow one F tree per node of Z_q

        Returns:
            PiggybackPlan with the F trees and their costs
        """
        hst = self.hst
        ledger = self.engine.ledger
        cost, logcost = self.cost_estimate(q, request.leaf)
        backbone = hst.path_to_root(request.leaf)
        z_q = list(backbone[: logcost + 1])

        trees: Dict[str, List[str]] = {}
        tree_costs: Dict[str, float] = {}
        for v in z_q:
            forest = self.forest(v)
            queue = deque([v])
            tree: Set[str] = set()
            while queue:
                w = queue.popleft()
                graph, spawned = self.find_leaves(q, w)
                tree |= graph
                forest.record_spawn(w, q, spawned)
                if spawned:
                    self.trace.emit("spawn", owner=v, w=w, q=q, spawned=list(spawned))
                queue.extend(spawned)
                self.build_witness(q, w, v)
            trees[v] = sorted(tree)
            tree_costs[v] = sum(hst.cost(x) for x in tree if x != v)

        inactive = -1
        for index, node_id in enumerate(backbone[:-1]):
            if ledger.has_active_leaf(node_id):
                break
            inactive = index

        self.trace.emit(
            "buildtree",
            rid=request.rid,
            q=q,
            cost=cost,
            logcost=logcost,
            z_q=z_q,
            trees=trees,
            tree_costs=tree_costs,
            inactive_prefix=inactive,
        )
        return PiggybackPlan(q=q, cost=cost, logcost=logcost, z_q=z_q, trees=trees, tree_costs=tree_costs)

    # Per-iteration updates

    def lower_updates(self, backbone: Sequence[str], i0: int, tau: Timestep, leaf: str) -> None:
        lam = self.hst.lam
        for index, node_id in enumerate(backbone[: i0 + 1]):
            xi = lam ** index * self.params.gamma / lam ** i0
            self.simple_update_tw(backbone, index, tau, xi)

    def simple_update_tw(self, backbone: Sequence[str], i: int, tau: Timestep, xi: float) -> TruncatedConstraint:
        """
        Solitary ⊥ when the charging tree at (v_{i*}, q) is a singleton; otherwise one
        constraint over the cheapest qualifying leaf level, with z set so the dual rises by ξ
        """
        hst = self.hst
        engine = self.engine
        request = self._request
        v = backbone[i]
        lp = engine.lps[v]
        q = self._q
        istar = min(i, self._logcost)
        anchor = backbone[istar]
        forest = self.forest(anchor)
        root_key = (anchor, q)
        self._xi[(i, istar)] = self._xi.get((i, istar), 0.0) + xi

        if forest.is_singleton(root_key):
            constraint = engine.bot_constraint(
                v, tau, request.leaf, request=(request.leaf, request.b, request.e)
            )
            lp.add_solitary(tau, constraint)
            self.trace.emit(
                "simple_update",
                node=v,
                tau=tau.as_list(),
                cid=constraint.cid,
                bot=True,
                xi=xi,
                istar=istar,
                tree_root=[anchor, q],
                interval=[request.b, request.e],
            )
            return constraint

        by_level: Dict[int, List] = {}
        for node in forest.tree_leaves(root_key):
            by_level.setdefault(hst.level(node.w), []).append(node)
        target = hst.cost(anchor) / hst.height
        chosen_level = None
        for level in sorted(by_level):
            if sum(hst.cost(node.w) for node in by_level[level]) >= target - settings.tolerance(target):
                chosen_level = level
                break
        if chosen_level is None:
            raise InvariantBreach(
                "witness level",
                f"no leaf level of the charging tree at ({anchor}, {q}) reaches c/H = {target!r}",
                len(self.trace),
            )

        # the most recent occurrence of a node wins
        members: Dict[str, Tuple[int, Annotation]] = {}
        for node in sorted(by_level[chosen_level], key=lambda n: n.q):
            if node.annotation is not None:
                members[node.w] = (node.q, node.annotation)
        if not members:
            raise InvariantBreach(
                "witness level", f"leaves of ({anchor}, {q}) carry no request annotation", len(self.trace)
            )

        terms = tuple(
            (u, Timestep(annotation[1], 0), tau) for u, (_, annotation) in sorted(members.items())
        )
        k_v = engine.ledger.snapshot(v, tau)
        rhs = len(members) - k_v - 2 * engine.delta * (engine.n - engine.measure(v))
        constraint = engine.register(
            TruncatedConstraint(
                cid=len(engine.constraints),
                owner=v,
                end=tau,
                rhs=rhs,
                source=SOURCE_SIMPLE,
                direct_terms=terms,
            )
        )
        constraint.z = xi / rhs
        lp.add_non_solitary(tau)
        lp.cons[tau].append(constraint)
        lp.gamma_budget[tau] = xi

        self.trace.emit(
            "dual_raised", cid=constraint.cid, node=v, tau=tau.as_list(), amount=constraint.z, z=constraint.z, spans={}
        )
        self.trace.emit(
            "simple_update",
            node=v,
            tau=tau.as_list(),
            cid=constraint.cid,
            bot=False,
            xi=xi,
            istar=istar,
            tree_root=[anchor, q],
            level=chosen_level,
            occurrences=len(by_level[chosen_level]),
            leaves=[[u, qj, a[1], a[2]] for u, (qj, a) in sorted(members.items())],
        )
        return constraint

    def piggyback_serve(self, plan: PiggybackPlan, q: int) -> float:
        """
        Tour 1 − δ′ of mass over every F tree and back: serves all pending requests at
        visited leaves and charges 2(1 − δ′)·Σ cost(F)

        Returns:
            Charged tour cost
        """
        visited = {x for nodes in plan.trees.values() for x in nodes if not self.hst.children(x)}
        served = sorted(
            r.rid for r in self.pending(q)
            if r.leaf in visited and r.rid != (self._request.rid if self._request else -1)
        )
        for rid in served:
            self.piggybacked.add(rid)
        plan.served = served
        charged = 2 * (1 - self.params.delta_prime) * plan.total_cost
        self.state.piggyback_cost += charged
        self.trace.emit(
            "piggyback_served",
            q=q,
            rid=self._request.rid if self._request else None,
            served=served,
            cost=charged,
            logcost=plan.logcost,
            gather=plan.cost,
        )
        return charged


def serve_sequence_tw(instance: Instance, listener: Optional[Listener] = None) -> RunState:
    """Run the time-windows simulator"""
    return TimeWindowSimulator(instance, listener).run()
