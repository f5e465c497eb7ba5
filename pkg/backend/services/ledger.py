"""
Server mass state and per-edge give/receive bookkeeping
"""
import logging
from bisect import bisect_right
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from config import settings
from models.hst import Hst
from models.instance import Timestep
from models.lp import InsufficientMass, OutOfOrderEntry

logger = logging.getLogger(__name__)

LOCAL = "local"
INHERITED = "inherited"

# Index of each cumulative series in _EdgeSeries.cumulative
_G, _R, _G_LOC, _G_INH = range(4)


class _EdgeSeries:
    """Cumulative g/r/g_loc/g_inh on one parent edge, indexed by timestep"""

    __slots__ = ("times", "cumulative")

    def __init__(self):
        self.times: List[Timestep] = []
        self.cumulative: List[List[float]] = [[], [], [], []]

    def add(self, tau: Timestep, series: int, amount: float) -> None:
        if not self.times or self.times[-1] < tau:
            self.times.append(tau)
            for values in self.cumulative:
                values.append(values[-1] if values else 0.0)
        elif self.times[-1] != tau:
            raise OutOfOrderEntry(f"Ledger entries must arrive in timestep order ({tau} after {self.times[-1]})")
        self.cumulative[series][-1] += amount

    def upto(self, series: int, tau: Timestep) -> float:
        index = bisect_right(self.times, tau)
        return self.cumulative[series][index - 1] if index else 0.0

    def between(self, series: int, lo: Timestep, hi: Timestep) -> float:
        if hi <= lo:
            return 0.0
        return self.upto(series, hi) - self.upto(series, lo)


class MovementLedger:
    """
    Leaf masses plus give/receive per (node, timestep).

    g(v, t) is mass leaving T_v over the edge above v at t, r(v, t) is mass entering;
    g splits into a local and an inherited component by the caller's attribution.
    """

    def __init__(self, hst: Hst, delta: float):
        self.hst = hst
        self.delta = delta
        self.mass: Dict[str, float] = {}
        self.subtree: Dict[str, float] = {node_id: 0.0 for node_id in hst.nodes}
        self._edges: Dict[str, _EdgeSeries] = {node_id: _EdgeSeries() for node_id in hst.nodes}
        self.mass_snapshots: Dict[Tuple[str, Timestep], float] = {}
        self.total_cost = 0.0

    @classmethod
    def starting(cls, hst: Hst, delta: float) -> "MovementLedger":
        """Dummy leaves at ½, every other leaf at δ/2"""
        ledger = cls(hst, delta)
        for leaf in hst.leaves:
            ledger._set_mass(leaf, 0.5 if hst.nodes[leaf].is_dummy else delta / 2)
        return ledger

    def _set_mass(self, leaf: str, value: float) -> None:
        change = value - self.mass.get(leaf, 0.0)
        self.mass[leaf] = value
        for node_id in self.hst.path_to_root(leaf):
            self.subtree[node_id] += change

    def total_mass(self) -> float:
        return sum(self.mass.values())

    def k(self, node_id: str) -> float:
        """Server mass currently in T_v"""
        return self.subtree[node_id]

    def snapshot(self, node_id: str, tau: Timestep) -> float:
        """Record k_{v,τ} for a constraint that references it"""
        value = self.subtree[node_id]
        self.mass_snapshots[(node_id, tau)] = value
        return value

    def is_active(self, leaf: str) -> bool:
        return self.mass[leaf] >= self.delta

    def active_leaves_below(self, node_id: str) -> List[str]:
        return [leaf for leaf in self.hst.leaves_below(node_id) if self.mass[leaf] >= self.delta]

    def has_active_leaf(self, node_id: str) -> bool:
        return any(self.mass[leaf] >= self.delta for leaf in self.hst.leaves_below(node_id))

    def activesib(self, node_id: str) -> List[str]:
        """Siblings of node_id with an active leaf in their subtree"""
        parent = self.hst.parent(node_id)
        if parent is None:
            return []
        return [
            sibling for sibling in self.hst.children(parent)
            if sibling != node_id and self.has_active_leaf(sibling)
        ]

    def g(self, node_id: str, lo: Timestep, hi: Timestep) -> float:
        return self._edges[node_id].between(_G, lo, hi)

    def r(self, node_id: str, lo: Timestep, hi: Timestep) -> float:
        return self._edges[node_id].between(_R, lo, hi)

    def g_local(self, node_id: str, lo: Timestep, hi: Timestep) -> float:
        return self._edges[node_id].between(_G_LOC, lo, hi)

    def g_inherited(self, node_id: str, lo: Timestep, hi: Timestep) -> float:
        return self._edges[node_id].between(_G_INH, lo, hi)

    def D(self, node_id: str, lo: Timestep, hi: Timestep) -> float:
        """D(v, (lo, hi]) = g − r over the half-open interval"""
        edge = self._edges[node_id]
        return edge.between(_G, lo, hi) - edge.between(_R, lo, hi)

    def drainable(self, sources: Iterable[str], floor: Optional[float] = None) -> float:
        floor = self.delta / 2 if floor is None else floor
        return sum(max(0.0, self.mass[leaf] - floor) for leaf in sources)

    def apply_transfer(
        self,
        sources: Sequence[str],
        dest: str,
        amount: float,
        tau: Timestep,
        attribution: str = LOCAL,
    ) -> Tuple[float, List[Tuple[str, float]]]:
        """
        Move mass from the source leaves (in the given order) to dest

        Each source is drained down to δ/2 before the next one is touched.

        Args:
            sources: Candidate leaves, drained in order
            dest: Receiving leaf
            amount: Mass to move
            tau: Timestep the movement is booked at
            attribution: LOCAL or INHERITED share of g

        Returns:
            (movement cost, [(source, amount taken)])

        Raises:
            InsufficientMass: When the sources hold less than amount above δ/2
        """
        if amount <= 0:
            return 0.0, []
        floor = self.delta / 2
        available = self.drainable(sources, floor)
        if available < amount - settings.tolerance(amount):
            raise InsufficientMass(
                f"Need {amount!r} at {tau}, sources {list(sources)} hold {available!r} above δ/2"
            )

        pieces: List[Tuple[str, float]] = []
        remaining = amount
        for leaf in sources:
            if remaining <= 0:
                break
            take = min(remaining, max(0.0, self.mass[leaf] - floor))
            if take <= 0:
                continue
            pieces.append((leaf, take))
            remaining -= take
        if remaining > 0 and pieces:
            # rounding residue goes to the last source
            leaf, take = pieces[-1]
            pieces[-1] = (leaf, take + remaining)

        cost = self.book(pieces, dest, tau, attribution)
        return cost, pieces

    def book(
        self,
        pieces: Sequence[Tuple[str, float]],
        dest: str,
        tau: Timestep,
        attribution: str = LOCAL,
    ) -> float:
        """Apply already-decided (source, amount) moves; returns their movement cost"""
        split = _G_LOC if attribution == LOCAL else _G_INH
        cost = 0.0
        for leaf, take in pieces:
            top = self.hst.lca(leaf, dest)
            for node_id in self.hst.path_to_root(leaf):
                if node_id == top:
                    break
                edge = self._edges[node_id]
                edge.add(tau, _G, take)
                edge.add(tau, split, take)
                cost += take * self.hst.cost(node_id)
            for node_id in self.hst.path_to_root(dest):
                if node_id == top:
                    break
                self._edges[node_id].add(tau, _R, take)
            self._set_mass(leaf, self.mass[leaf] - take)
            self._set_mass(dest, self.mass[dest] + take)
        self.total_cost += cost
        return cost

    def upward_crossings(self) -> List[Tuple[str, Timestep, float]]:
        """(node, τ, g(node, τ)) for every booked upward crossing"""
        crossings = []
        for node_id, edge in self._edges.items():
            previous = 0.0
            for index, tau in enumerate(edge.times):
                value = edge.cumulative[_G][index]
                if value - previous > 0:
                    crossings.append((node_id, tau, value - previous))
                previous = value
        return sorted(crossings, key=lambda item: (item[1], item[0]))
