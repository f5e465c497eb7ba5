"""
Trace auditor: replays a run trace and checks every invariant the algorithms rely on
"""
import logging
from collections import Counter
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import pandas as pd

from config import settings
from models.forest import ChargingForest
from models.hst import Hst
from models.instance import Instance, Timestep
from models.lp import TruncatedConstraint
from models.report import AuditReport, InvariantResult
from models.run import InvariantBreach, RequestSummary
from services.kserver_tw import forest_cost_bound
from services.trace import Event

logger = logging.getLogger(__name__)

COMMON_CHECKS = (
    "mass bounds",
    "conservation",
    "trace consistency",
    "positive rhs",
    "dual per timestep",
    "slackness",
    "depletion monotone",
    "awake soundness",
    "y bound",
    "span bound",
    "inflow bound",
    "saturation",
)
KSERVER_CHECKS = (
    "update cost",
    "per-iteration cost",
    "movement accounting",
)
TW_CHECKS = (
    "gamma range",
    "principal gamma",
    "z_q prefix",
    "forest cost",
    "iteration bound",
    "xi budget",
    "low congestion I",
    "low congestion II",
    "monotonicity I",
    "monotonicity II",
    "service contract",
)


class _Check:
    __slots__ = ("name", "checked", "passed", "worst", "counterexample", "event_index")

    def __init__(self, name: str):
        self.name = name
        self.checked = 0
        self.passed = True
        self.worst: Optional[float] = None
        self.counterexample: Optional[str] = None
        self.event_index: Optional[int] = None

    def result(self) -> InvariantResult:
        return InvariantResult(
            name=self.name,
            passed=self.passed,
            checked=self.checked,
            worst=self.worst,
            counterexample=self.counterexample,
            event_index=self.event_index,
        )


def max_congestion(intervals: Iterable[Tuple[int, int]]) -> int:
    """Largest number of closed integer intervals [lo, hi] sharing a point"""
    marks: List[Tuple[int, int]] = []
    for lo, hi in intervals:
        if lo > hi:
            continue
        marks.append((lo, 1))
        marks.append((hi + 1, -1))
    marks.sort()
    best = current = 0
    for _, step in marks:
        current += step
        best = max(best, current)
    return best


def max_interval_load(intervals: Sequence[Tuple[Timestep, Timestep, float]]) -> float:
    """Largest total weight of half-open intervals (lo, hi] covering one timestep"""
    events: List[Tuple[Timestep, int, float]] = []
    for lo, hi, weight in intervals:
        if hi <= lo or weight == 0:
            continue
        events.append((lo, 1, weight))
        events.append((hi, 0, weight))
    events.sort(key=lambda item: (item[0], item[1]))
    best = current = 0.0
    index = 0
    while index < len(events):
        key = events[index][0]
        stop = index
        while stop < len(events) and events[stop][0] == key:
            stop += 1
        batch = events[index:stop]
        if any(kind == 0 for _, kind, _ in batch):
            best = max(best, current)
        for _, kind, weight in batch:
            current += weight if kind == 1 else -weight
        index = stop
    return best


class TraceAuditor:
    """
    Replays trace events one at a time

    Feed it events in order (it doubles as a simulator listener), then call report().

    Args:
        instance: Instance the trace was produced from
        checks: Evaluate invariants (False only rebuilds totals and per-request rows)
        strict: Raise InvariantBreach at the first failing check
    """

    def __init__(self, instance: Instance, checks: bool = True, strict: bool = False):
        self.instance = instance
        self.hst: Hst = instance.hst
        self.checks = checks
        self.strict = strict
        self.algorithm = "kserver"
        self.events = 0
        self._results: Dict[str, _Check] = {}

        self.height = self.hst.height
        self.lam = self.hst.lam
        self.k = instance.k
        self.delta_prime = instance.params.delta_prime
        self.delta = instance.params.delta
        self.gamma = instance.params.gamma
        self.m = 0.0

        self.mass: Dict[str, float] = {}
        self.initial_total = 0.0
        self.touched: Set[str] = set()
        self.constraints: Dict[int, TruncatedConstraint] = {}
        self.by_timestep: Dict[Tuple[str, Timestep], List[int]] = {}
        self.removed: Set[Tuple[str, Timestep]] = set()
        self.gamma_at: Dict[Tuple[str, Timestep], Optional[float]] = {}
        self.y_max = 0.0
        self.max_su = 0
        self.max_span = 0
        self.movement_cost = 0.0
        self.piggyback_cost = 0.0
        self.reported_cost: Optional[float] = None
        self.iteration_cost = 0.0

        self.requests: Dict[int, Dict[str, Any]] = {}
        self.current: Optional[int] = None
        self.piggybacked: Set[int] = set()
        self.forests: Dict[str, ChargingForest] = {}
        self.solitary_intervals: Dict[str, Dict[int, Tuple[int, int]]] = {}

    # Check bookkeeping

    def check(
        self,
        name: str,
        ok: bool,
        index: int,
        detail: str,
        ratio: Optional[float] = None,
    ) -> None:
        if not self.checks:
            return
        entry = self._results.setdefault(name, _Check(name))
        entry.checked += 1
        if ratio is not None:
            entry.worst = ratio if entry.worst is None else max(entry.worst, ratio)
        if ok:
            return
        if entry.passed:
            entry.passed = False
            entry.counterexample = detail
            entry.event_index = index
            logger.warning(f"⚠️ {name} violated at event {index}: {detail}")
        if self.strict:
            raise InvariantBreach(name, detail, index)

    def _close(self, value: float, target: float) -> bool:
        return abs(value - target) <= settings.tolerance(target)

    def _at_most(self, value: float, bound: float) -> bool:
        return value <= bound + settings.tolerance(bound)

    # Replay

    def __call__(self, index: int, event: Event) -> None:
        self.feed(index, event)

    def feed(self, index: int, event: Event) -> None:
        self.events = index + 1
        handler = getattr(self, f"_on_{event['event']}", None)
        if handler is not None:
            handler(index, event)

    def _on_run_started(self, index: int, event: Event) -> None:
        self.algorithm = event["algorithm"]
        self.m = event["m"]
        self.gamma = event["gamma"]
        self.delta = event["delta"]
        self.delta_prime = event["delta_prime"]
        self.mass = {leaf: mass for leaf, mass in event["masses"]}
        self.initial_total = sum(self.mass.values())
        self.touched = set(self.mass)
        self._check_masses(index)

    def _on_constraint_added(self, index: int, event: Event) -> None:
        end = Timestep.from_list(event["end"])
        picks = tuple(self.constraints[cid] for cid in event["picks"])
        constraint = TruncatedConstraint(
            cid=event["cid"],
            owner=event["owner"],
            end=end,
            rhs=event["rhs"],
            source=event["source"],
            direct_terms=tuple(
                (node, Timestep.from_list(lo), Timestep.from_list(hi)) for node, lo, hi in event["terms"]
            ),
            picks=picks,
            is_bot=event["bot"],
            request=tuple(event["request"]) if event["request"] else None,
        )
        self.constraints[constraint.cid] = constraint
        self.by_timestep.setdefault((constraint.owner, end), []).append(constraint.cid)
        self.check("positive rhs", constraint.rhs > 0, index, f"constraint {constraint.cid} has b = {constraint.rhs!r}")
        for pick in picks:
            self.check(
                "depletion monotone",
                not pick.depleted,
                index,
                f"depleted constraint {pick.cid} picked by {constraint.cid}",
            )
            self.check(
                "awake soundness",
                (pick.owner, pick.end) not in self.removed,
                index,
                f"constraint {constraint.cid} picks {pick.cid} at a removed timestep {tuple(pick.end)}",
            )

    def _on_dual_raised(self, index: int, event: Event) -> None:
        constraint = self.constraints[event["cid"]]
        constraint.z = event["z"]
        amount = event["amount"]
        if constraint.owner == self.hst.root:
            self._request_add("dual_gained", constraint.rhs * amount)
        for pick in constraint.picks:
            if pick.is_bot:
                continue
            pick.parent_load += amount
            bound = (1.0 + 1.0 / self.height) * pick.z
            self.check(
                "slackness",
                self._at_most(pick.parent_load, bound),
                index,
                f"constraint {pick.cid} carries parent dual {pick.parent_load!r} > (1 + 1/H)z = {bound!r}",
                ratio=pick.parent_load / bound if bound > 0 else None,
            )

    def _on_constraint_depleted(self, index: int, event: Event) -> None:
        constraint = self.constraints[event["cid"]]
        self.check("depletion monotone", not constraint.depleted, index, f"constraint {constraint.cid} depleted twice")
        constraint.depleted = True

    def _on_awake_removed(self, index: int, event: Event) -> None:
        key = (event["node"], Timestep.from_list(event["tau"]))
        held = [self.constraints[cid] for cid in self.by_timestep.get(key, ())]
        ok = bool(held) and all(c.depleted and not c.is_bot for c in held)
        self.check("awake soundness", ok, index, f"{key[1]} removed from Awake({key[0]}) with slack constraints left")
        self.removed.add(key)

    def _on_transfer(self, index: int, event: Event) -> None:
        dest = event["dest"]
        for source, amount in event["pieces"]:
            top = self.hst.lca(source, dest)
            cost = amount * self.hst.upward_cost(source, top)
            self.movement_cost += cost
            self.iteration_cost += cost
            self._request_add("movement_cost", cost)
            self.mass[source] -= amount
            self.mass[dest] += amount
            self.touched.update((source, dest))
        for row in self.requests.values():
            if row["open"] and row["leaf"] == dest:
                row["peak"] = max(row["peak"], self.mass[dest])

    def _on_full_update(self, index: int, event: Event) -> None:
        node = event["node"]
        tau = Timestep.from_list(event["tau"])
        h = event["level"]
        scale = self.lam ** h
        self.gamma_at[(node, tau)] = self.gamma
        self.y_max = max(self.y_max, event["y_max"])
        self.max_su = max(self.max_su, event["max_su"])
        self.max_span = max(self.max_span, event["max_span"])

        dual = sum(
            self.constraints[cid].rhs * self.constraints[cid].z
            for cid in self.by_timestep.get((node, tau), ())
            if not self.constraints[cid].is_bot
        )
        self.check(
            "dual per timestep",
            self._close(dual, self.gamma),
            index,
            f"FullUpdate({node}, {tuple(tau)}) reached dual {dual!r} instead of γ = {self.gamma!r}",
        )

        y_bound = 4 * self.gamma * self.m + self.k
        self.check(
            "y bound",
            self._at_most(event["y_max"], y_bound),
            index,
            f"y at {node} reached {event['y_max']!r} > 4γM + k = {y_bound!r}",
            ratio=event["y_max"] / y_bound,
        )
        self.check(
            "span bound",
            event["max_span"] <= self.m,
            index,
            f"{event['max_span']} non-solitary timesteps in one interval exceed M = {self.m!r}",
        )

        upper = (self.gamma - event["loss"]) / scale
        floor = self.gamma / (4 * self.height * scale)
        if self.algorithm == "tw":
            upper += floor
        self.check(
            "inflow bound",
            self._at_most(event["inflow"], upper),
            index,
            f"FullUpdate({node}, {tuple(tau)}) moved {event['inflow']!r} into the principal subtree, bound {upper!r}",
            ratio=event["inflow"] / upper if upper > 0 else None,
        )
        if self.algorithm == "tw":
            if len(event["units"]) > 1:
                self.check(
                    "inflow bound",
                    event["inflow"] >= floor - settings.tolerance(floor),
                    index,
                    f"FullUpdate({node}, {tuple(tau)}) moved {event['inflow']!r} < γ/(4Hλ^h) = {floor!r}",
                )
            principal = (event["principal"], tau)
            if principal in self.gamma_at and self.gamma_at[principal] is not None:
                self.check(
                    "principal gamma",
                    self._close(self.gamma_at[principal], self.gamma),
                    index,
                    f"Γ({event['principal']}, {tuple(tau)}) = {self.gamma_at[principal]!r} under a FullUpdate",
                )
        else:
            bound = 2 * self.gamma
            self.check(
                "update cost",
                self._at_most(event["cost"], bound),
                index,
                f"FullUpdate({node}, {tuple(tau)}) cost {event['cost']!r} > 2γ",
                ratio=event["cost"] / bound,
            )

    def _on_simple_update(self, index: int, event: Event) -> None:
        node = event["node"]
        tau = Timestep.from_list(event["tau"])
        if event["bot"]:
            self.gamma_at[(node, tau)] = None
            if "interval" in event:
                q = tau.q
                self.solitary_intervals.setdefault(node, {})[q] = (event["interval"][0], q)
            return
        xi = event["xi"]
        self.gamma_at[(node, tau)] = xi
        constraint = self.constraints[event["cid"]]
        self.check(
            "dual per timestep",
            self._close(constraint.rhs * constraint.z, xi),
            index,
            f"SimpleUpdate({node}, {tuple(tau)}) dual {constraint.rhs * constraint.z!r} instead of ξ = {xi!r}",
        )
        low = self.gamma / self.lam ** self.height
        self.check(
            "gamma range",
            low - settings.tolerance(low) <= xi <= self.gamma + settings.tolerance(self.gamma),
            index,
            f"Γ({node}, {tuple(tau)}) = {xi!r} outside [γ/λ^H, γ]",
        )

    def _on_timestep_advanced(self, index: int, event: Event) -> None:
        tau = Timestep.from_list(event["tau"])
        self._check_masses(index)
        row = self.requests.get(event["rid"])
        if row is not None:
            reported = event["mass"]
            self.check(
                "trace consistency",
                self._close(self.mass[row["leaf"]], reported),
                index,
                f"replayed mass {self.mass[row['leaf']]!r} at {row['leaf']} differs from {reported!r}",
            )
        if self.algorithm == "kserver":
            bound = 2 * self.gamma * (self.height - event["i0"])
            self.check(
                "per-iteration cost",
                self._at_most(self.iteration_cost, bound),
                index,
                f"timestep {tuple(tau)} cost {self.iteration_cost!r} > 2γ(H − i0) = {bound!r}",
                ratio=self.iteration_cost / bound if bound > 0 else None,
            )
        self.iteration_cost = 0.0

    def _check_masses(self, index: int) -> None:
        low = self.delta / 2
        high = 1.0 - self.delta_prime / 2
        for leaf in sorted(self.touched):
            value = self.mass[leaf]
            self.check(
                "mass bounds",
                low - settings.tolerance(low) <= value <= high + settings.tolerance(high),
                index,
                f"mass {value!r} at {leaf} outside [δ/2, 1 − δ′/2]",
            )
        self.touched = set()
        total = sum(self.mass.values())
        self.check(
            "conservation",
            abs(total - self.initial_total) <= settings.ABSOLUTE_TOLERANCE + 1e-9,
            index,
            f"total mass {total!r} drifted from {self.initial_total!r}",
        )

    # Requests

    def _request_add(self, field: str, amount: float) -> None:
        if self.current is not None:
            self.requests[self.current][field] += amount

    def _on_request_started(self, index: int, event: Event) -> None:
        rid = event["rid"]
        self.requests[rid] = {
            "leaf": event["leaf"],
            "b": event["b"],
            "e": event["e"],
            "open": True,
            "peak": self.mass[event["leaf"]],
            "movement_cost": 0.0,
            "piggyback_cost": 0.0,
            "dual_gained": 0.0,
            "timesteps": 0,
            "critical": False,
        }
        if self.algorithm == "kserver":
            self.current = rid

    def _on_critical(self, index: int, event: Event) -> None:
        self.current = event["rid"]
        self.requests[event["rid"]]["critical"] = True

    def _on_request_done(self, index: int, event: Event) -> None:
        rid = event["rid"]
        row = self.requests[rid]
        row["open"] = False
        row["timesteps"] = event["iterations"]
        leaf = row["leaf"]
        mass = self.mass[leaf]
        row["peak"] = max(row["peak"], mass)
        threshold = 1.0 - self.delta_prime
        self.current = None

        if self.algorithm == "kserver" or row["critical"]:
            self.check(
                "saturation",
                mass > threshold - settings.tolerance(threshold),
                index,
                f"request {rid} left {leaf} at {mass!r} ≤ 1 − δ′",
            )
        if self.algorithm != "tw":
            return

        mark = 1.0 - 2 * self.delta_prime
        self.check(
            "service contract",
            row["peak"] >= mark - settings.tolerance(mark) or rid in self.piggybacked,
            index,
            f"request {rid} at {leaf} peaked at {row['peak']!r} and was not piggybacked",
        )
        if not row["critical"]:
            return

        cost = event["cost"]
        bound = 8 * self.height * cost / self.gamma
        self.check(
            "iteration bound",
            event["iterations"] <= bound + 1,
            index,
            f"request {rid} took {event['iterations']} timesteps > 8H·cost/γ = {bound!r}",
            ratio=event["iterations"] / bound if bound > 0 else None,
        )
        backbone = self.hst.path_to_root(leaf)
        spent: Dict[int, float] = {}
        for _, istar, total in event["xi"]:
            spent[istar] = spent.get(istar, 0.0) + total
        for istar, total in sorted(spent.items()):
            budget = 12 * self.height * self.hst.cost(backbone[istar])
            self.check(
                "xi budget",
                self._at_most(total, budget),
                index,
                f"request {rid}: Σξ charged to v_{istar} is {total!r} > 12H·c = {budget!r}",
                ratio=total / budget,
            )

    def _on_buildtree(self, index: int, event: Event) -> None:
        for v, cost in event["tree_costs"].items():
            bound = forest_cost_bound(self.hst, v)
            self.check(
                "forest cost",
                self._at_most(cost, bound),
                index,
                f"F tree at ({v}, {event['q']}) costs {cost!r} > {bound!r}",
                ratio=cost / bound,
            )
        prefix = event["inactive_prefix"]
        if prefix >= 0:
            self.check(
                "z_q prefix",
                event["logcost"] >= prefix + 1,
                index,
                f"v_0..v_{prefix} inactive at {event['q']} but logcost = {event['logcost']}",
            )

    def _on_piggyback_served(self, index: int, event: Event) -> None:
        self.piggybacked.update(event["served"])
        self.piggyback_cost += event["cost"]
        if event["rid"] is not None and event["rid"] in self.requests:
            self.requests[event["rid"]]["piggyback_cost"] += event["cost"]

    def _forest(self, owner: str) -> ChargingForest:
        if owner not in self.forests:
            self.forests[owner] = ChargingForest(owner)
        return self.forests[owner]

    def _on_witness_node(self, index: int, event: Event) -> None:
        annotation = tuple(event["annotation"]) if event["annotation"] else None
        self._forest(event["owner"]).add_node(event["w"], event["q"], annotation)

    def _on_witness_edge(self, index: int, event: Event) -> None:
        forest = self._forest(event["owner"])
        parent = tuple(event["parent"])
        child = tuple(event["child"])
        forest.add_edge(parent, child)
        e_parent = forest.nodes[parent].annotation
        e_child = forest.nodes[child].annotation
        ok = e_parent is not None and e_child is not None and e_child[2] <= e_parent[2]
        self.check(
            "monotonicity I",
            ok,
            index,
            f"edge {parent} → {child} in the forest of {event['owner']} has deadlines {e_parent} / {e_child}",
        )

    def _on_run_finished(self, index: int, event: Event) -> None:
        self.reported_cost = event["movement_cost"]
        self.check(
            "trace consistency",
            self._close(self.movement_cost, event["movement_cost"]),
            index,
            f"replayed movement cost {self.movement_cost!r} differs from {event['movement_cost']!r}",
        )

    # Final checks

    def root_constraints(self) -> List[TruncatedConstraint]:
        root = self.hst.root
        return [c for c in self.constraints.values() if c.owner == root and not c.is_bot]

    def root_dual(self) -> float:
        return sum(c.rhs * c.z for c in self.root_constraints())

    def dual_loads(self) -> Dict[str, float]:
        """β per local LP: max over (u, t) of the dual on y^v(u, t) divided by c_u"""
        per_variable: Dict[Tuple[str, str], List[Tuple[Timestep, Timestep, float]]] = {}
        for constraint in self.constraints.values():
            if constraint.is_bot or constraint.z <= 0:
                continue
            for u, lo, hi in constraint.lhs_terms():
                per_variable.setdefault((constraint.owner, u), []).append((lo, hi, constraint.z))
        beta: Dict[str, float] = {}
        for (owner, u), intervals in sorted(per_variable.items()):
            ratio = max_interval_load(intervals) / self.hst.cost(u)
            beta[owner] = max(beta.get(owner, 0.0), ratio)
        return beta

    def _congestion_checks(self) -> Dict[str, Dict[int, int]]:
        histograms: Dict[str, Counter] = {"low congestion I": Counter(), "low congestion II": Counter()}
        for node, intervals in sorted(self.solitary_intervals.items()):
            worst = max_congestion(intervals.values())
            histograms["low congestion I"][worst] += 1
            self.check(
                "low congestion I",
                worst <= self.height,
                self.events - 1,
                f"solitary intervals at {node} reach congestion {worst} > H",
                ratio=worst / self.height,
            )

        for owner, forest in sorted(self.forests.items()):
            per_u: Dict[str, List[Tuple[int, int]]] = {}
            roots = sorted(q for w, q in forest.nodes if w == owner)
            for q in roots:
                key = (owner, q)
                members = forest.descendants(key)
                for member in members:
                    annotation = member.annotation
                    ok = annotation is not None and member.q <= annotation[2] <= q
                    self.check(
                        "monotonicity II",
                        ok,
                        self.events - 1,
                        f"vertex {member.key} of the tree at {key} has annotation {annotation}",
                    )
                if forest.is_singleton(key):
                    continue
                latest: Dict[str, Tuple[int, int]] = {}
                for leaf_vertex in sorted(forest.tree_leaves(key), key=lambda n: n.q):
                    if leaf_vertex.annotation is not None:
                        latest[leaf_vertex.w] = (leaf_vertex.annotation[1] + 1, q)
                for u, interval in latest.items():
                    per_u.setdefault(u, []).append(interval)
            for u, intervals in sorted(per_u.items()):
                worst = max_congestion(intervals)
                histograms["low congestion II"][worst] += 1
                self.check(
                    "low congestion II",
                    worst <= self.height + 1,
                    self.events - 1,
                    f"charging-tree intervals of {u} in the forest of {owner} reach congestion {worst} > H + 1",
                    ratio=worst / (self.height + 1),
                )
        return {name: dict(sorted(counts.items())) for name, counts in histograms.items()}

    def _rows(self) -> List[RequestSummary]:
        rows = []
        for rid in sorted(self.requests):
            row = self.requests[rid]
            rows.append(
                RequestSummary(
                    rid=rid,
                    leaf=row["leaf"],
                    b=row["b"],
                    e=row["e"],
                    timesteps=row["timesteps"],
                    movement_cost=row["movement_cost"],
                    piggyback_cost=row["piggyback_cost"],
                    dual_gained=row["dual_gained"],
                    critical=row["critical"],
                    piggybacked=rid in self.piggybacked,
                    peak_mass=row["peak"],
                )
            )
        return rows

    def report(self) -> AuditReport:
        """
        Finish the replay: β, congestion, accounting, and one result per check

        Returns:
            AuditReport
        """
        root_dual = self.root_dual()
        beta = self.dual_loads()
        congestion: Dict[str, Dict[int, int]] = {}
        if self.algorithm == "tw":
            congestion = self._congestion_checks()
        else:
            bound = 2 * self.height * root_dual
            self.check(
                "movement accounting",
                self._at_most(self.movement_cost, bound),
                max(self.events - 1, 0),
                f"movement cost {self.movement_cost!r} > 2H × root dual = {bound!r}",
                ratio=self.movement_cost / bound if bound > 0 else None,
            )

        names = COMMON_CHECKS + (TW_CHECKS if self.algorithm == "tw" else KSERVER_CHECKS)
        invariants = []
        if self.checks:
            invariants = [self._results.get(name, _Check(name)).result() for name in names]

        report = AuditReport(
            algorithm=self.algorithm,
            events=self.events,
            invariants=invariants,
            beta_measured=max(beta.values(), default=0.0),
            beta_by_node=beta,
            congestion=congestion,
            m_value=self.m,
            y_bound=4 * self.gamma * self.m + self.k,
            y_max=self.y_max,
            max_su=self.max_su,
            movement_cost=self.movement_cost,
            piggyback_cost=self.piggyback_cost,
            root_dual=root_dual,
            constraints=len(self.constraints),
            requests=self._rows(),
        )
        if report.failures():
            logger.warning(f"❌ Audit found {len(report.failures())} failing check(s)")
        else:
            logger.info(f"✅ Audit passed {len(report.invariants)} checks over {self.events} events")
        return report


def audit_trace(instance: Instance, events: Iterable[Event], checks: bool = True) -> AuditReport:
    """Replay a complete trace post hoc"""
    auditor = TraceAuditor(instance, checks=checks)
    for index, event in enumerate(events):
        auditor.feed(index, event)
    return auditor.report()


def invariant_table(report: AuditReport) -> pd.DataFrame:
    """Human-readable table of the audited checks"""
    return pd.DataFrame(
        [
            {
                "check": result.name,
                "status": "ok" if result.passed else "FAIL",
                "checked": result.checked,
                "worst": result.worst,
                "first counterexample": result.counterexample or "",
            }
            for result in report.invariants
        ],
        columns=["check", "status", "checked", "worst", "first counterexample"],
    )
