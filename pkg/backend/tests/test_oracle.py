"""
Tests for the offline oracles and root-constraint verification
"""
import numpy as np
import pytest

from config import settings
from models.instance import Timestep
from models.lp import TruncatedConstraint, SOURCE_FULL
from models.oracle import GraphTooLarge, Movement, TooManyCombinations
from models.run import InfeasibleGather
from services.instance_io import parse_instance
from services.kserver_tw import gather_cost
from services.oracle import (
    gather_flow_cost,
    integer_costs,
    opt_kserver,
    opt_tw_bruteforce,
    verify_root_constraints,
)
from tests.conftest import star_text, two_level_text


class TestFlowOracle:
    """Exact k-server optimum on the time-expanded tree"""

    def test_cross_root_once(self):
        instance = parse_instance(two_level_text("a 1 2", "c 3 4"))
        certificate = opt_kserver(instance)
        assert certificate.opt_cost == pytest.approx(21)
        assert certificate.service_times == [1, 3]

    def test_same_leaf_is_free(self):
        instance = parse_instance(two_level_text("a 1 2", "a 3 4", "a 5 6"))
        assert opt_kserver(instance).opt_cost == 0

    def test_back_and_forth(self):
        instance = parse_instance(star_text("a 1 2", "b 3 4", "a 5 6"))
        assert opt_kserver(instance).opt_cost == pytest.approx(2)

    def test_two_servers(self):
        text = two_level_text("a 1 2", "c 3 4", "a 5 6", "c 7 8").replace("k 1", "k 2")
        text = text.replace("gamma 0.002", "gamma 0.001").replace("delta 0.02", "delta 0.012")
        instance = parse_instance(text)
        assert opt_kserver(instance).opt_cost == 0

    def test_with_start_visits_dummies(self):
        instance = parse_instance(star_text("a 1 2", "b 3 4", "a 5 6"))
        certificate = opt_kserver(instance, with_start=True)
        assert certificate.opt_cost == pytest.approx(4)
        nodes = sorted(move.node for move in certificate.movements)
        assert nodes == ["a", "b", "dummy0", "dummy1"]

    def test_crossings_labelled_after_service(self):
        instance = parse_instance(star_text("a 1 2", "b 3 4"))
        certificate = opt_kserver(instance)
        assert [(m.node, m.q, m.tick) for m in certificate.movements] == [("a", 3, 1)]

    def test_graph_cap(self, monkeypatch):
        monkeypatch.setattr(settings, "ORACLE_NODE_CAP", 10)
        instance = parse_instance(star_text("a 1 2", "b 3 4"))
        with pytest.raises(GraphTooLarge):
            opt_kserver(instance)

    def test_integer_costs(self):
        instance = parse_instance(two_level_text("a 1 2"))
        costs, scale = integer_costs(instance.hst)
        assert scale == 1
        assert costs["x"] == 20 and costs["a"] == 1


class TestBruteForce:
    """Service times chosen inside the windows"""

    def test_matches_flow_on_unit_windows(self):
        instance = parse_instance(two_level_text("a 1 2", "c 3 4"))
        assert opt_tw_bruteforce(instance).opt_cost == pytest.approx(opt_kserver(instance).opt_cost)

    def test_windows_allow_batching(self):
        instance = parse_instance(two_level_text("a 1 6", "c 2 3", "a 4 5"))
        brute = opt_tw_bruteforce(instance)
        assert brute.opt_cost == pytest.approx(21)
        assert opt_kserver(instance).opt_cost == pytest.approx(42)
        assert brute.service_times[2] in (4, 5)

    def test_cap(self):
        instance = parse_instance(two_level_text("a 1 6", "c 2 3", "a 4 5"))
        with pytest.raises(TooManyCombinations):
            opt_tw_bruteforce(instance, cap=3)


class TestRootVerification:
    """LHS of root constraints on an offline movement list"""

    @staticmethod
    def root_constraint(rhs):
        return TruncatedConstraint(
            cid=7,
            owner="r",
            end=Timestep(5, 2),
            rhs=rhs,
            source=SOURCE_FULL,
            direct_terms=(("a", Timestep(1, 0), Timestep(5, 2)), ("b", Timestep(0, 0), Timestep(5, 2))),
        )

    def test_satisfied(self):
        moves = [Movement(node="a", q=3, tick=1, amount=1.0), Movement(node="b", q=5, tick=1, amount=1.0)]
        report = verify_root_constraints(moves, [self.root_constraint(1.5)])
        assert report.ok
        assert report.checked == 1
        assert report.min_slack == pytest.approx(0.5)

    def test_interval_is_half_open(self):
        moves = [Movement(node="a", q=1, tick=0, amount=1.0), Movement(node="b", q=5, tick=3, amount=1.0)]
        report = verify_root_constraints(moves, [self.root_constraint(0.5)])
        assert not report.ok
        assert report.violations[0].lhs == 0

    def test_bot_constraints_skipped(self):
        bot = TruncatedConstraint(cid=1, owner="r", end=Timestep(1, 1), rhs=0.9, source=SOURCE_FULL, is_bot=True)
        assert verify_root_constraints([], [bot]).checked == 0


class TestGatherFlow:
    """The greedy gather cost is a min-cost flow on a tree"""

    @pytest.mark.parametrize("seed", range(8))
    def test_greedy_matches_flow(self, seed):
        instance = parse_instance(two_level_text("a 1 2"))
        hst = instance.hst
        rng = np.random.default_rng(seed)
        masses = {leaf: float(m) for leaf, m in zip(hst.leaves, rng.uniform(0.1, 0.5, len(hst.leaves)))}
        leaf = hst.leaves[int(rng.integers(0, len(hst.leaves)))]
        expected = gather_flow_cost(hst, masses, leaf, 0.3, 0.008)
        assert gather_cost(hst, masses, leaf, 0.3, 0.008) == pytest.approx(expected, rel=1e-6)

    def test_infeasible(self):
        instance = parse_instance(star_text("a 1 2"))
        masses = {"a": 0.005, "b": 0.005, "dummy0": 0.1, "dummy1": 0.1}
        with pytest.raises(InfeasibleGather):
            gather_flow_cost(instance.hst, masses, "a", 0.5, 0.008)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
