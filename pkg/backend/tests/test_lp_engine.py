"""
Unit tests for the local LP engine
"""
import pytest

from models.instance import ORIGIN, Timestep
from models.lp import (
    ChildMissing,
    LocalLp,
    NoAwakeTimestep,
    NotAncestor,
    NonPositiveRhs,
    NotSlack,
    TruncatedConstraint,
    SOURCE_FULL,
    SOURCE_SIMPLE,
)
from services.instance_io import parse_instance
from services.kserver import serve_sequence
from services.ledger import INHERITED, LOCAL
from services.lp_engine import LpEngine, dual_objective, is_slack, loss, prev_awake
from services.trace import TraceRecorder
from tests.conftest import star_text

TAU = Timestep(1, 1)


def star_engine():
    instance = parse_instance(star_text("a 1 2"))
    engine = LpEngine(instance, TraceRecorder())
    engine.set_initial_constraints()
    return engine


def constraint(cid=0, owner="u", end=TAU, rhs=0.5, z=0.0, bot=False):
    built = TruncatedConstraint(cid=cid, owner=owner, end=end, rhs=rhs, source=SOURCE_FULL, is_bot=bot)
    built.z = z
    return built


class TestHelpers:
    """Pure functions over constraints and local LPs"""

    def test_slack_while_margin_positive(self):
        c = constraint(z=1.0)
        c.parent_load = 1.2
        assert is_slack(c, height=2)
        c.parent_load = 1.5
        assert not is_slack(c, height=2)

    def test_bot_always_slack(self):
        c = constraint(bot=True)
        c.depleted = True
        assert is_slack(c, height=2)

    def test_prev_awake(self):
        lp = LocalLp("u", 0)
        lp.add_non_solitary(Timestep(1, 1))
        lp.add_non_solitary(Timestep(3, 1))
        assert prev_awake(lp, Timestep(2, 0)) == Timestep(1, 1)
        assert prev_awake(lp, Timestep(3, 1)) == Timestep(3, 1)
        with pytest.raises(NoAwakeTimestep):
            prev_awake(lp, Timestep(0, 5))

    def test_dual_objective(self):
        assert dual_objective([constraint(rhs=0.4, z=0.02)]) == pytest.approx(0.008)

    def test_loss_counts_parent_dual_on_own_constraints(self):
        child, parent = LocalLp("u", 0), LocalLp("v", 1)
        child.add_non_solitary(TAU)
        mine = constraint(cid=1, owner="u", rhs=0.5)
        child.cons[TAU].append(mine)
        above = TruncatedConstraint(cid=2, owner="v", end=TAU, rhs=1.0, source=SOURCE_FULL, picks=(mine,))
        above.z = 0.01
        parent.add_non_solitary(TAU)
        parent.cons[TAU].append(above)
        assert loss("u", TAU, child, parent) == pytest.approx(0.005)

    def test_loss_zero_on_solitary(self):
        child, parent = LocalLp("u", 0), LocalLp("v", 1)
        child.add_solitary(TAU, constraint(bot=True))
        assert loss("u", TAU, child, parent) == 0.0


class TestConstraints:
    """⊥-constraints and the composition rule"""

    def test_initial_constraints(self):
        engine = star_engine()
        initial = engine.lps["dummy0"].cons[ORIGIN][0]
        assert initial.is_bot
        assert initial.rhs == pytest.approx(1 - 0.5 - 2 * 0.01 * 4)
        assert engine.lps["dummy1"].is_awake(ORIGIN)

    def test_bot_rhs(self):
        engine = star_engine()
        bot = engine.bot_constraint("a", TAU, "a")
        assert bot.rhs == pytest.approx(1 - 0.005 - 2 * 0.01 * 4)
        assert bot.source == SOURCE_SIMPLE
        assert engine.ledger.mass_snapshots[("a", TAU)] == pytest.approx(0.005)

    def test_bot_rhs_must_be_positive(self):
        engine = star_engine()
        with pytest.raises(NonPositiveRhs):
            engine.bot_constraint("r", TAU, "a")

    def test_bot_needs_request_below_node(self):
        engine = star_engine()
        with pytest.raises(NotAncestor):
            engine.bot_constraint("a", TAU, "b")

    def test_compose(self):
        engine = star_engine()
        bot = engine.bot_constraint("a", TAU, "a")
        picks = {
            "a": bot,
            "dummy0": engine.lps["dummy0"].cons[ORIGIN][0],
            "dummy1": engine.lps["dummy1"].cons[ORIGIN][0],
        }
        composed = engine.compose("r", TAU, picks)
        assert composed.rhs == pytest.approx(0.915 + 0.42 + 0.42 + 2 * 0.01)
        assert sorted(composed.direct_terms) == [("dummy0", ORIGIN, TAU), ("dummy1", ORIGIN, TAU)]
        assert {pick.cid for pick in composed.picks} == {c.cid for c in picks.values()}
        assert composed.lhs_terms() == list(composed.direct_terms)

    def test_compose_reads_d_terms(self):
        engine = star_engine()
        engine.ledger.apply_transfer(["dummy0"], "a", 0.1, Timestep(0, 7))
        bot = engine.bot_constraint("a", TAU, "a")
        picks = {
            "a": bot,
            "dummy0": engine.lps["dummy0"].cons[ORIGIN][0],
            "dummy1": engine.lps["dummy1"].cons[ORIGIN][0],
        }
        composed = engine.compose("r", TAU, picks)
        assert composed.rhs == pytest.approx((1 - 0.105 - 0.08) + 0.42 + 0.1 + 0.42 + 0.02)

    def test_compose_needs_every_active_child(self):
        engine = star_engine()
        picks = {
            "a": engine.bot_constraint("a", TAU, "a"),
            "dummy0": engine.lps["dummy0"].cons[ORIGIN][0],
        }
        with pytest.raises(ChildMissing):
            engine.compose("r", TAU, picks)

    def test_compose_rejects_depleted_pick(self):
        engine = star_engine()
        depleted = constraint(cid=99, owner="dummy1", end=ORIGIN, rhs=0.3, z=1.0)
        depleted.depleted = True
        picks = {
            "a": engine.bot_constraint("a", TAU, "a"),
            "dummy0": engine.lps["dummy0"].cons[ORIGIN][0],
            "dummy1": depleted,
        }
        with pytest.raises(NotSlack):
            engine.compose("r", TAU, picks)

    def test_compose_rejects_future_pick(self):
        engine = star_engine()
        picks = {
            "a": engine.bot_constraint("a", Timestep(2, 1), "a"),
            "dummy0": engine.lps["dummy0"].cons[ORIGIN][0],
            "dummy1": engine.lps["dummy1"].cons[ORIGIN][0],
        }
        with pytest.raises(NotSlack):
            engine.compose("r", TAU, picks)


class TestFullUpdate:
    """One FullUpdate at the root of the star"""

    def test_dual_and_transfer(self):
        engine = star_engine()
        engine.simple_update("a", TAU, "a")
        outcome = engine.full_update("r", TAU, "a")

        composed = engine.root_constraints()[0]
        assert outcome.dual_raised == pytest.approx(0.002)
        assert composed.z == pytest.approx(0.002 / 1.775)
        assert engine.root_dual() == pytest.approx(0.002)
        assert outcome.transferred == pytest.approx(0.84 * 0.002 / 1.775, rel=1e-6)
        assert outcome.cost == pytest.approx(outcome.transferred)
        assert engine.ledger.mass["a"] == pytest.approx(0.005 + outcome.transferred)
        assert engine.lps["r"].gamma_budget[TAU] == 0.002

    def test_events(self):
        engine = star_engine()
        engine.simple_update("a", TAU, "a")
        engine.full_update("r", TAU, "a")
        kinds = [event["event"] for event in engine.trace]
        for kind in ("constraint_added", "simple_update", "dual_raised", "transfer", "full_update"):
            assert kind in kinds
        full = engine.trace.of_kind("full_update")[0]
        assert full["units"] == ["a", "dummy0", "dummy1"]
        assert full["loss"] == 0.0
        assert full["dual"] == pytest.approx(0.002)

    def test_transfer_events_carry_attribution(self):
        engine = star_engine()
        engine.simple_update("a", TAU, "a")
        engine.full_update("r", TAU, "a")

        transfers = engine.trace.of_kind("transfer")
        assert transfers
        assert {event["attribution"] for event in transfers} <= {LOCAL, INHERITED, "topup"}
        assert any(event["attribution"] == INHERITED for event in transfers)
        moved = 0.0
        for event in transfers:
            assert event["dest"] == "a"
            assert event["child"] != "a"
            for source, amount in event["pieces"]:
                assert source != "a"
                assert amount > 0
                moved += amount
        assert engine.ledger.mass["a"] == pytest.approx(0.005 + moved)

    def test_principal_must_be_awake(self):
        engine = star_engine()
        with pytest.raises(NoAwakeTimestep):
            engine.full_update("r", TAU, "a")


class TestServeMovesMass:
    """A full run on the star drives FullUpdate transfers end to end"""

    def test_single_request(self):
        state = serve_sequence(parse_instance(star_text("a 1 2")))
        transfers = state.trace.of_kind("transfer")
        assert transfers
        assert state.movement_cost > 0
        assert state.summaries[0].peak_mass > 1 - 0.3
        assert state.ledger.total_mass() == pytest.approx(1.01)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
