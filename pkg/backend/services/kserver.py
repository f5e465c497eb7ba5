"""
Fractional k-server on a λ-HST: main loop, SimpleUpdate and FullUpdate per backbone node
"""
import logging
from typing import List, Optional, Sequence

from config import settings
from models.instance import Instance, Request, Timestep
from models.run import (
    InvariantBreach,
    NoActiveLeavesAnywhere,
    RequestSummary,
    WindowMismatch,
)
from services.ledger import MovementLedger
from services.lp_engine import LpEngine
from services.trace import Listener, TraceRecorder

logger = logging.getLogger(__name__)


class RunState:
    """
    Everything a finished (or aborted) run leaves behind
    """

    def __init__(self, instance: Instance, engine: LpEngine, trace: TraceRecorder, algorithm: str):
        self.instance = instance
        self.engine = engine
        self.trace = trace
        self.algorithm = algorithm
        self.tau = Timestep(0, 0)
        self.movement_cost = 0.0
        self.piggyback_cost = 0.0
        self.root_dual = 0.0
        self.summaries: List[RequestSummary] = []

    @property
    def ledger(self) -> MovementLedger:
        return self.engine.ledger

    @property
    def lps(self):
        return self.engine.lps


def pick_i0(backbone: Sequence[str], ledger: MovementLedger) -> int:
    """
    Smallest backbone index whose node has a sibling subtree with an active leaf

    Raises:
        NoActiveLeavesAnywhere: When no backbone node below the root has one
    """
    for index, node_id in enumerate(backbone[:-1]):
        if ledger.activesib(node_id):
            return index
    raise NoActiveLeavesAnywhere(f"No active sibling subtree along {list(backbone)}")


class KServerSimulator:
    """
    Serves a unit-window request stream, recording every LP and transfer event

    Args:
        instance: Instance whose requests all have e = b + 1
        listener: Optional per-event callback (inline auditing)
    """

    algorithm = "kserver"

    def __init__(self, instance: Instance, listener: Optional[Listener] = None):
        self.instance = instance
        self.trace = TraceRecorder(listener)
        self.engine = LpEngine(instance, self.trace, time_windows=self.algorithm == "tw")
        self.state = RunState(instance, self.engine, self.trace, self.algorithm)
        self.hst = instance.hst
        self.params = instance.params

    def _start(self) -> None:
        self.trace.emit(
            "run_started",
            algorithm=self.algorithm,
            k=self.instance.k,
            n=self.engine.n,
            height=self.hst.height,
            lam=self.hst.lam,
            delta_prime=self.params.delta_prime,
            delta=self.params.delta,
            gamma=self.params.gamma,
            m=self.engine.m,
            masses=[[leaf, mass] for leaf, mass in sorted(self.engine.ledger.mass.items())],
        )
        self.engine.set_initial_constraints()

    def _finish(self) -> None:
        self.trace.emit(
            "run_finished",
            movement_cost=self.state.movement_cost,
            piggyback_cost=self.state.piggyback_cost,
            root_dual=self.state.root_dual,
            constraints=len(self.engine.constraints),
            max_su=self.engine.max_su,
        )
        logger.info(
            f"✅ {self.algorithm} run done: {len(self.instance.requests)} requests, "
            f"cost={self.state.movement_cost:.6g}, root dual={self.state.root_dual:.6g}"
        )

    def run(self) -> RunState:
        """
        Serve every request in arrival order

        Returns:
            RunState with the trace and per-request summaries

        Raises:
            WindowMismatch: A request window is not [b, b + 1]
            RunError / LpError: On any invariant breach
        """
        for request in self.instance.requests:
            if not request.is_unit_window:
                raise WindowMismatch(
                    f"Request {request.rid} has window [{request.b}, {request.e}]; use the tw simulator"
                )
        self._start()
        for request in self.instance.requests:
            summary = self.serve(request)
            self.state.summaries.append(summary)
        self._finish()
        return self.state

    def serve(self, request: Request, time: Optional[int] = None) -> RequestSummary:
        """
        Main loop for one request: one timestep per iteration until the leaf is saturated
        """
        leaf = request.leaf
        q = request.b if time is None else time
        self.trace.emit("request_started", rid=request.rid, leaf=leaf, b=request.b, e=request.e, q=q)
        cost_before = self.state.movement_cost
        dual_before = self.state.root_dual
        iterations = self.saturate(leaf, q, request.rid)
        self.trace.emit(
            "request_done",
            rid=request.rid,
            leaf=leaf,
            q=q,
            mass=self.engine.ledger.mass[leaf],
            iterations=iterations,
        )
        return RequestSummary(
            rid=request.rid,
            leaf=leaf,
            b=request.b,
            e=request.e,
            timesteps=iterations,
            movement_cost=self.state.movement_cost - cost_before,
            dual_gained=self.state.root_dual - dual_before,
            peak_mass=self.engine.ledger.mass[leaf],
        )

    def saturate(self, leaf: str, q: int, rid: int, cap: Optional[int] = None) -> int:
        """Run the while-loop at time q; returns the number of timesteps used"""
        ledger = self.engine.ledger
        backbone = self.hst.path_to_root(leaf)
        threshold = 1.0 - self.params.delta_prime
        limit = cap if cap is not None else settings.MAX_ITERATIONS_PER_REQUEST
        tau = Timestep(q, 1)
        iterations = 0
        while ledger.mass[leaf] <= threshold:
            iterations += 1
            if iterations > limit:
                raise InvariantBreach(
                    "iteration cap",
                    f"request {rid} at {leaf!r} not saturated after {limit} timesteps",
                    len(self.trace),
                )
            i0 = pick_i0(backbone, ledger)
            self.lower_updates(backbone, i0, tau, leaf)
            for node_id in backbone[i0 + 1:]:
                outcome = self.engine.full_update(node_id, tau, leaf, top_up=self.algorithm == "tw")
                self.state.movement_cost += outcome.cost
                if node_id == self.hst.root:
                    self.state.root_dual += outcome.dual_raised
            self.trace.emit(
                "timestep_advanced",
                tau=tau.as_list(),
                rid=rid,
                i0=i0,
                mass=ledger.mass[leaf],
            )
            self.state.tau = tau
            tau = tau.next()
        return iterations

    def lower_updates(self, backbone: Sequence[str], i0: int, tau: Timestep, leaf: str) -> None:
        for node_id in backbone[: i0 + 1]:
            self.engine.simple_update(node_id, tau, leaf)


def serve_sequence(instance: Instance, listener: Optional[Listener] = None) -> RunState:
    """Run the k-server simulator on a unit-window instance"""
    return KServerSimulator(instance, listener).run()


if __name__ == "__main__":
    import sys

    from services.instance_io import parse_instance

    logging.basicConfig(level=settings.LOG_LEVEL)
    with open(sys.argv[1], encoding="utf-8") as handle:
        state = serve_sequence(parse_instance(handle.read()))
    print(f"movement cost: {state.movement_cost:.6g}")
    print(f"root dual:     {state.root_dual:.6g}")
