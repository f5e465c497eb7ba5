"""
Tests for the time-windows simulator: critical requests, BuildTree, charging forests
and piggybacking
"""
import pytest

from models.forest import ChargingForest, DuplicateVertex
from models.instance import Timestep
from models.run import InfeasibleGather, InvariantBreach
from services.auditor import TW_CHECKS, audit_trace
from services.instance_io import parse_instance
from services.kserver_tw import (
    TimeWindowSimulator,
    forest_cost_bound,
    gather_cost,
    log_cost,
    serve_sequence_tw,
)
from tests.conftest import star_text

WIDE_STAR = """\
hst 10
node r - 1
{nodes}k 1
param delta_prime 0.35
param delta 0.01
param gamma 0.002
{requests}"""


def wide_star():
    """Twelve leaves under the root; l_i arrives at i + 1 with deadline 112 − i"""
    nodes = "".join(f"node l{i} r 0\n" for i in range(12))
    requests = "".join(f"request l{i} {i + 1} {112 - i}\n" for i in range(12))
    return parse_instance(WIDE_STAR.format(nodes=nodes, requests=requests))


def arrived_simulator(instance):
    simulator = TimeWindowSimulator(instance)
    simulator._start()
    for request in instance.requests:
        simulator.arrive(request)
    return simulator


class TestHelpers:
    """Gather cost and logcost"""

    def test_log_cost(self):
        assert log_cost(1.39, 20, 1) == 1
        assert log_cost(0.01, 20, 2) == 0
        assert log_cost(10, 20, 2) == 2
        assert log_cost(0.5, 20, 2) == 1

    def test_gather_cost_nearest_first(self):
        instance = parse_instance(star_text("a 1 4", "b 2 3"))
        masses = {"a": 0.005, "b": 0.3, "dummy0": 0.5, "dummy1": 0.2}
        assert gather_cost(instance.hst, masses, "a", 0.6, 0.008) == pytest.approx(1.2)

    def test_gather_cost_infeasible(self):
        instance = parse_instance(star_text("a 1 4", "b 2 3"))
        masses = {"a": 0.005, "b": 0.005, "dummy0": 0.1, "dummy1": 0.1}
        with pytest.raises(InfeasibleGather):
            gather_cost(instance.hst, masses, "a", 0.5, 0.008)

    def test_forest_cost_bound(self):
        instance = parse_instance(star_text("a 1 4", "b 2 3"))
        assert forest_cost_bound(instance.hst, "r") == pytest.approx(20 * 1.05)


class TestStarRun:
    """b becomes critical at 3; its tour passes a and serves it"""

    def test_rows(self, star_tw):
        state = serve_sequence_tw(star_tw)
        first, second = state.summaries
        assert second.critical and not second.piggybacked
        assert second.peak_mass > 1 - star_tw.params.delta_prime
        assert first.piggybacked and not first.critical
        assert first.timesteps == 0

    def test_buildtree(self, star_tw):
        state = serve_sequence_tw(star_tw)
        built = state.trace.of_kind("buildtree")[0]
        assert built["cost"] == pytest.approx(0.695 * 2)
        assert built["logcost"] == 1
        assert built["z_q"] == ["b", "r"]
        assert built["trees"]["r"] == ["a", "b", "r"]
        assert built["tree_costs"] == {"b": 0.0, "r": 2.0}

    def test_piggyback_cost(self, star_tw):
        state = serve_sequence_tw(star_tw)
        assert state.piggyback_cost == pytest.approx(2 * 0.7 * 2)
        served = state.trace.of_kind("piggyback_served")[0]
        assert served["served"] == [0]

    def test_solitary_updates_carry_the_window(self, star_tw):
        state = serve_sequence_tw(star_tw)
        updates = state.trace.of_kind("simple_update")
        assert updates
        assert all(update["bot"] and update["interval"] == [2, 3] for update in updates)

    def test_window_term_in_root_constraints(self, star_tw):
        state = serve_sequence_tw(star_tw)
        root = state.engine.root_constraints()[0]
        assert ("b", Timestep(2, 0), Timestep(3, 1)) in root.lhs_terms()

    def test_audit_passes(self, star_tw):
        state = serve_sequence_tw(star_tw)
        report = audit_trace(star_tw, state.trace.events)
        assert report.algorithm == "tw"
        assert {result.name for result in report.invariants} >= set(TW_CHECKS)
        assert report.passed, [failure.counterexample for failure in report.failures()]
        assert report.piggyback_cost == pytest.approx(2.8)

    def test_same_leaf_served_by_saturation(self):
        instance = parse_instance(star_text("a 1 6", "a 2 3"))
        state = serve_sequence_tw(instance)
        first, second = state.summaries
        assert second.critical
        assert not first.critical and not first.piggybacked
        assert first.peak_mass >= 1 - 2 * instance.params.delta_prime

    def test_unit_windows_accepted(self, star_kserver):
        state = serve_sequence_tw(star_kserver)
        assert state.summaries[0].critical and state.summaries[1].critical
        assert state.piggyback_cost > 0


class TestFindLeaves:
    """EDF path collection and spawning"""

    def test_spawns_earliest_deadlines(self):
        simulator = arrived_simulator(wide_star())
        graph, spawned = simulator.find_leaves(20, "r")
        assert set(spawned) == {f"l{i}" for i in range(2, 12)}
        assert graph == {"r"} | set(spawned)

    def test_no_spawn_below_threshold(self):
        instance = wide_star()
        simulator = TimeWindowSimulator(instance)
        simulator._start()
        for request in instance.requests[:5]:
            simulator.arrive(request)
        graph, spawned = simulator.find_leaves(20, "r")
        assert spawned == ()
        assert graph == {"r", "l0", "l1", "l2", "l3", "l4"}

    def test_leaf_spawns_nothing(self):
        simulator = arrived_simulator(wide_star())
        assert simulator.find_leaves(20, "l3") == ({"l3"}, ())

    def test_earliest_leaf_req(self):
        simulator = arrived_simulator(wide_star())
        assert simulator.earliest_leaf_req("r", 20) == ("l11", 12, 101)
        assert simulator.earliest_leaf_req("l0", 20) == ("l0", 1, 112)


class TestChargingForest:
    """Witness trees across two critical times"""

    @staticmethod
    def built_twice():
        instance = wide_star()
        simulator = arrived_simulator(instance)
        critical = instance.requests[-1]
        simulator.build_tree(20, critical)
        plan = simulator.build_tree(30, critical)
        return simulator, critical, plan

    def test_first_tree_is_singleton(self):
        simulator, _, _ = self.built_twice()
        assert simulator.forest("r").is_singleton(("r", 20))

    def test_second_tree_links_to_spawned_vertices(self):
        simulator, _, _ = self.built_twice()
        forest = simulator.forest("r")
        assert not forest.is_singleton(("r", 30))
        assert sorted(forest.nodes[("r", 30)].children) == sorted((f"l{i}", 20) for i in range(2, 12))

    def test_plan(self):
        _, _, plan = self.built_twice()
        assert plan.logcost == 1
        assert plan.z_q == ["l11", "r"]
        assert plan.tree_costs["r"] == pytest.approx(10.0)

    def test_simple_update_over_leaf_level(self):
        simulator, critical, _ = self.built_twice()
        simulator._q = 30
        simulator._logcost = 1
        simulator._request = critical
        tau = Timestep(30, 1)
        constraint = simulator.simple_update_tw(("l11", "r"), 1, tau, 0.002)

        assert not constraint.is_bot
        assert len(constraint.direct_terms) == 10
        assert ("l5", Timestep(6, 0), tau) in constraint.direct_terms
        assert constraint.rhs == pytest.approx(10 - 1.06)
        assert constraint.rhs * constraint.z == pytest.approx(0.002)
        assert simulator.engine.lps["r"].gamma_budget[tau] == 0.002

    def test_witness_level_must_reach_threshold(self):
        instance = wide_star()
        simulator = arrived_simulator(instance)
        forest = simulator.forest("r")
        forest.add_node("l0", 40, ("l0", 1, 112))
        forest.add_node("r", 50, ("l0", 1, 112))
        forest.add_edge(("r", 50), ("l0", 40))
        simulator._q = 50
        simulator._logcost = 1
        simulator._request = instance.requests[0]
        with pytest.raises(InvariantBreach):
            simulator.simple_update_tw(("l0", "r"), 1, Timestep(50, 1), 0.002)

    def test_vertex_added_once(self):
        forest = ChargingForest("r")
        forest.add_node("r", 20, ("l11", 12, 101))
        with pytest.raises(DuplicateVertex):
            forest.add_node("r", 20, ("l11", 12, 101))
        assert len(forest) == 1


class TestWideStarRun:
    """Full run where the first critical request spawns and the next one links back to it"""

    def test_spawn_then_witness_edges(self):
        state = serve_sequence_tw(wide_star())
        spawns = state.trace.of_kind("spawn")
        assert spawns
        assert spawns[0]["q"] == 101
        assert set(spawns[0]["spawned"]) == {f"l{i}" for i in range(2, 12)}

        edges = state.trace.of_kind("witness_edge")
        assert edges
        assert all(edge["child"][1] == 101 for edge in edges)
        assert {edge["parent"][1] for edge in edges} == {111}

    def test_every_request_served(self):
        state = serve_sequence_tw(wide_star())
        assert len(state.summaries) == 12
        piggybacked = {summary.leaf for summary in state.summaries if summary.piggybacked}
        assert piggybacked >= {f"l{i}" for i in range(2, 11)}

    def test_audit_passes(self):
        instance = wide_star()
        state = serve_sequence_tw(instance)
        report = audit_trace(instance, state.trace.events)
        assert report.passed, [failure.counterexample for failure in report.failures()]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
