"""
Local LP engine shared by both simulators: ⊥-constraints, composition, awake sets,
and the primal-dual FullUpdate with closed-form segment integration
"""
import logging
from bisect import bisect_right
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from config import settings
from models.instance import Instance, Timestep, ORIGIN
from models.lp import (
    LocalLp,
    Term,
    TruncatedConstraint,
    SOURCE_FULL,
    SOURCE_INITIAL,
    SOURCE_SIMPLE,
    ChildMissing,
    NoAwakeTimestep,
    NonPositiveRhs,
    NotAncestor,
    NotSlack,
)
from models.run import InvariantBreach
from services.hst_builder import dummy_chain
from services.ledger import INHERITED, LOCAL, MovementLedger
from services.trace import TraceRecorder

logger = logging.getLogger(__name__)


class UpdateOutcome(NamedTuple):
    dual_raised: float
    transferred: float
    cost: float


def is_slack(constraint: TruncatedConstraint, height: int) -> bool:
    """⊥-constraints are always slack; others while (1 + 1/H)·z exceeds the parent load"""
    if constraint.is_bot:
        return True
    return not constraint.depleted and constraint.margin(height) > 0


def prev_awake(lp: LocalLp, tau: Timestep) -> Timestep:
    """Greatest awake timestep ≤ τ"""
    index = bisect_right(lp.awake, tau)
    if index == 0:
        raise NoAwakeTimestep(f"No awake timestep at or before {tuple(tau)} for {lp.node!r}")
    return lp.awake[index - 1]


def dual_objective(constraints: Iterable[TruncatedConstraint]) -> float:
    return sum(c.rhs * c.z for c in constraints)


def loss(u: str, tau: Timestep, child_lp: LocalLp, parent_lp: LocalLp) -> float:
    """
    Same-timestep parent dual charged against u's constraints at τ

    Zero when τ is solitary for u.
    """
    if tau in child_lp.solitary or tau not in child_lp.cons:
        return 0.0
    mine = {c.cid: c for c in child_lp.cons[tau]}
    total = 0.0
    for parent_constraint in parent_lp.cons.get(tau, ()):
        for pick in parent_constraint.picks:
            if pick.cid in mine:
                total += pick.rhs * parent_constraint.z
    return total


class LpEngine:
    """
    Owns the local LPs, the movement ledger and the constraint registry of one run

    Args:
        instance: Validated instance (tree with dummies, params)
        trace: Recorder every constraint, dual and transfer event goes to
        time_windows: Use the time-window composition rule and M
    """

    def __init__(self, instance: Instance, trace: TraceRecorder, time_windows: bool = False):
        self.instance = instance
        self.hst = instance.hst
        self.height = self.hst.height
        self.lam = self.hst.lam
        self.params = instance.params
        self.gamma = instance.params.gamma
        self.delta = instance.params.delta
        self.n = instance.n
        self.m = instance.m_value(time_windows)
        self.time_windows = time_windows
        self.trace = trace
        self.ledger = MovementLedger.starting(self.hst, self.delta)
        self.lps: Dict[str, LocalLp] = {
            node_id: LocalLp(node_id, node.level) for node_id, node in self.hst.nodes.items()
        }
        self.constraints: List[TruncatedConstraint] = []
        self.max_su = 0
        self.max_nonsolitary_span = 0

    # Registry

    def measure(self, node_id: str) -> int:
        return self.hst.measure(node_id, self.params.subtree_measure)

    def _next_cid(self) -> int:
        return len(self.constraints)

    def register(self, constraint: TruncatedConstraint) -> TruncatedConstraint:
        if constraint.rhs <= 0:
            raise NonPositiveRhs(f"{constraint!r} has b^C = {constraint.rhs!r}")
        self.constraints.append(constraint)
        self.trace.emit("constraint_added", **constraint.to_event())
        return constraint

    def set_initial_constraints(self) -> None:
        """⊥-constraints at (0, 0) for every node of every dummy chain"""
        for dummy in self.hst.dummy_leaves:
            for node_id in dummy_chain(self.hst, dummy):
                constraint = self.bot_constraint(node_id, ORIGIN, dummy, source=SOURCE_INITIAL)
                self.lps[node_id].add_solitary(ORIGIN, constraint)

    # Constraint construction

    def bot_constraint(
        self,
        v: str,
        tau: Timestep,
        request_leaf: str,
        source: str = SOURCE_SIMPLE,
        request: Optional[Tuple[str, int, int]] = None,
    ) -> TruncatedConstraint:
        """
        ⊥-constraint at v ending at τ: empty LHS, b = 1 − k_{v,τ} − 2δ(n − n_v)

        Raises:
            NonPositiveRhs: When the parameter inequalities failed to keep b positive
        """
        if not self.hst.is_ancestor(v, request_leaf):
            raise NotAncestor(f"{request_leaf!r} is not below {v!r}")
        k_v = self.ledger.snapshot(v, tau)
        rhs = 1.0 - k_v - 2 * self.delta * (self.n - self.measure(v))
        constraint = TruncatedConstraint(
            cid=self._next_cid(),
            owner=v,
            end=tau,
            rhs=rhs,
            source=source,
            is_bot=True,
            request=request,
        )
        return self.register(constraint)

    def compose(
        self,
        v: str,
        tau: Timestep,
        picks: Dict[str, TruncatedConstraint],
    ) -> TruncatedConstraint:
        """
        Composition rule: one slack child constraint per child with active leaves

        D terms are read from the ledger now and frozen into the RHS.

        Raises:
            NotSlack: A pick is depleted
            ChildMissing: A child with active leaves has no pick
        """
        for child in self.hst.children(v):
            if child not in picks and self.ledger.has_active_leaf(child):
                raise ChildMissing(f"Child {child!r} of {v!r} has active leaves but no pick")

        terms: List[Term] = []
        rhs = 0.0
        measure_gap = self.measure(v)
        for u, pick in picks.items():
            if not is_slack(pick, self.height):
                raise NotSlack(f"{pick!r} is depleted")
            if pick.owner != u or self.hst.parent(u) != v:
                raise ChildMissing(f"Pick {pick!r} does not belong to a child {u!r} of {v!r}")
            if pick.end > tau:
                raise NotSlack(f"{pick!r} ends after {tuple(tau)}")
            if pick.end < tau:
                terms.append((u, pick.end, tau))
            if self.time_windows and pick.is_bot and pick.request is not None:
                opened = Timestep(pick.request[1], 0)
                if opened < pick.end:
                    terms.append((u, opened, pick.end))
            rhs += self.ledger.D(u, pick.end, tau) + pick.rhs
            measure_gap -= self.measure(u)
        rhs += measure_gap * self.delta

        constraint = TruncatedConstraint(
            cid=self._next_cid(),
            owner=v,
            end=tau,
            rhs=rhs,
            source=SOURCE_FULL,
            direct_terms=tuple(terms),
            picks=tuple(picks.values()),
        )
        return self.register(constraint)

    # Procedures

    def simple_update(self, v: str, tau: Timestep, leaf: str) -> TruncatedConstraint:
        """Solitary timestep: a single ⊥-constraint with A = {leaf}"""
        constraint = self.bot_constraint(v, tau, leaf)
        self.lps[v].add_solitary(tau, constraint)
        self.trace.emit(
            "simple_update",
            node=v,
            tau=tau.as_list(),
            cid=constraint.cid,
            bot=True,
        )
        return constraint

    def full_update(self, v: str, tau: Timestep, leaf: str, top_up: bool = False) -> UpdateOutcome:
        """
        Non-solitary timestep: compose, raise duals until the objective reaches γ,
        raise y exponentially and move mass from the active siblings to the request leaf

        Args:
            v: Backbone node above i₀
            tau: Current timestep
            leaf: Request location v₀
            top_up: Time-window rule forcing at least γ/(4Hλ^h) of transfer

        Returns:
            UpdateOutcome with the dual raised, mass moved and its cost
        """
        hst = self.hst
        h = hst.level(v) - 1
        scale = self.lam ** h
        u0 = hst.child_toward(v, leaf)
        siblings = self.ledger.activesib(u0)
        units = [u0] + siblings
        pools = {u: self.ledger.active_leaves_below(u) for u in siblings}
        lp = self.lps[v]
        lp.add_non_solitary(tau)
        lp.gamma_budget[tau] = self.gamma

        offset = self.gamma / (self.m * self.n)
        target = self.gamma
        tolerance = settings.tolerance(target)
        dual = 0.0
        rounds = 0
        call_max_su = 0
        moved: Dict[Tuple[str, str], Dict[str, float]] = {}
        inflow = 0.0
        cost = 0.0

        while dual < target - tolerance:
            rounds += 1
            if rounds > settings.MAX_REPEAT_ROUNDS:
                raise InvariantBreach(
                    "repeat-loop bound",
                    f"FullUpdate({v}, {tuple(tau)}) exceeded {settings.MAX_REPEAT_ROUNDS} rounds",
                    len(self.trace),
                )

            picks: Dict[str, TruncatedConstraint] = {}
            for u in units:
                tau_u = prev_awake(self.lps[u], tau)
                pick = next((c for c in self.lps[u].cons[tau_u] if is_slack(c, self.height)), None)
                if pick is None:
                    raise InvariantBreach(
                        "awake soundness",
                        f"{tuple(tau_u)} is awake at {u!r} but holds no slack constraint",
                        len(self.trace),
                    )
                picks[u] = pick
            if picks[u0].end != tau:
                raise InvariantBreach(
                    "principal timestep awake",
                    f"principal {u0!r} resolved to {tuple(picks[u0].end)} instead of {tuple(tau)}",
                    len(self.trace),
                )

            composed = self.compose(v, tau, picks)
            lp.cons[tau].append(composed)

            spans: Dict[str, List[Timestep]] = {}
            for u in siblings:
                tau_u = picks[u].end
                span = self.lps[u].non_solitary_between(tau_u, tau)
                self.max_nonsolitary_span = max(self.max_nonsolitary_span, len(span))
                first = tau_u.next()
                if first <= tau and (not span or span[0] != first):
                    span = [first] + span
                spans[u] = span
                call_max_su = max(call_max_su, len(span))
                self.max_su = max(self.max_su, len(span))

            length = (target - dual) / composed.rhs
            for pick in picks.values():
                if not pick.is_bot:
                    length = min(length, pick.margin(self.height))
            if length <= 0:
                raise InvariantBreach(
                    "segment length",
                    f"non-positive segment {length!r} in FullUpdate({v}, {tuple(tau)})",
                    len(self.trace),
                )

            growth = float(np.expm1(length / scale))
            for u in siblings:
                local = 0.0
                for t in spans[u]:
                    before = lp.y.get((u, t), 0.0)
                    local += lp.raise_y((u, t), before + (before + offset) * growth)
                inherited = picks[u].rhs * length / scale
                for kind, amount in ((LOCAL, local), (INHERITED, inherited)):
                    spent, pieces = self.ledger.apply_transfer(pools[u], leaf, amount, tau, kind)
                    cost += spent
                    inflow += amount if pieces else 0.0
                    bucket = moved.setdefault((u, kind), {})
                    for source, take in pieces:
                        bucket[source] = bucket.get(source, 0.0) + take

            composed.z += length
            dual += composed.rhs * length
            self.trace.emit(
                "dual_raised",
                cid=composed.cid,
                node=v,
                tau=tau.as_list(),
                amount=length,
                z=composed.z,
                spans={u: len(span) for u, span in spans.items()},
            )

            for u, pick in picks.items():
                if pick.is_bot:
                    continue
                pick.parent_load += length
                if pick.margin(self.height) <= settings.tolerance(pick.z):
                    pick.parent_load = (1.0 + 1.0 / self.height) * pick.z
                    pick.depleted = True
                    self.trace.emit("constraint_depleted", cid=pick.cid, node=u, tau=pick.end.as_list())
                    child_lp = self.lps[u]
                    if all(c.depleted for c in child_lp.cons[pick.end]):
                        if u == u0 and pick.end == tau:
                            raise InvariantBreach(
                                "principal timestep awake",
                                f"{tuple(tau)} would leave Awake({u0})",
                                len(self.trace),
                            )
                        child_lp.remove_awake(pick.end)
                        self.trace.emit("awake_removed", node=u, tau=pick.end.as_list())

        topup = 0.0
        if top_up and siblings:
            floor_amount = self.gamma / (4 * self.height * scale)
            if inflow < floor_amount:
                topup = floor_amount - inflow
                sources = sorted(leaf_id for u in siblings for leaf_id in pools[u])
                spent, pieces = self.ledger.apply_transfer(sources, leaf, topup, tau, LOCAL)
                cost += spent
                inflow += topup
                bucket = moved.setdefault(("*", "topup"), {})
                for source, take in pieces:
                    bucket[source] = bucket.get(source, 0.0) + take

        for (u, kind), bucket in moved.items():
            if not bucket:
                continue
            self.trace.emit(
                "transfer",
                node=v,
                tau=tau.as_list(),
                child=u,
                attribution=kind,
                dest=leaf,
                pieces=[[source, amount] for source, amount in sorted(bucket.items())],
            )

        lost = loss(u0, tau, self.lps[u0], lp)
        self.trace.emit(
            "full_update",
            node=v,
            tau=tau.as_list(),
            principal=u0,
            units=units,
            level=h,
            dual=dual,
            inflow=inflow,
            cost=cost,
            loss=lost,
            rounds=rounds,
            topup=topup,
            max_su=call_max_su,
            max_span=self.max_nonsolitary_span,
            y_max=lp.y_max,
        )
        logger.debug(
            f"FullUpdate({v}, {tuple(tau)}): {rounds} round(s), inflow={inflow:.3e}, loss={lost:.3e}"
        )
        return UpdateOutcome(dual, inflow, cost)

    # Views

    def root_constraints(self) -> List[TruncatedConstraint]:
        return [c for c in self.lps[self.hst.root].constraints() if not c.is_bot]

    def root_dual(self) -> float:
        return dual_objective(self.root_constraints())
