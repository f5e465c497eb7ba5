"""
Tests for the trace auditor
"""
import copy

import pytest

from models.instance import Timestep
from models.run import InvariantBreach
from services.auditor import (
    COMMON_CHECKS,
    KSERVER_CHECKS,
    TraceAuditor,
    audit_trace,
    invariant_table,
    max_congestion,
    max_interval_load,
)
from services.kserver import serve_sequence
from services.trace import read_trace


def tampered(events, kind, change):
    """Copy of the trace with change() applied to the first event of the given kind"""
    events = copy.deepcopy(events)
    for event in events:
        if event["event"] == kind:
            change(event)
            break
    return events


def double_pieces(event):
    event["pieces"] = [[source, 2 * amount] for source, amount in event["pieces"]]


class TestCongestion:
    """Pointwise interval counting"""

    def test_closed_integer_intervals(self):
        assert max_congestion([(1, 3), (3, 5), (6, 7)]) == 2
        assert max_congestion([(1, 2), (3, 4)]) == 1
        assert max_congestion([]) == 0

    def test_weighted_half_open(self):
        a, b, c = Timestep(0, 0), Timestep(2, 1), Timestep(4, 0)
        assert max_interval_load([(a, b, 0.5), (b, c, 0.25)]) == pytest.approx(0.5)
        assert max_interval_load([(a, c, 0.5), (b, c, 0.25)]) == pytest.approx(0.75)

    def test_empty_intervals_ignored(self):
        a = Timestep(1, 0)
        assert max_interval_load([(a, a, 3.0)]) == 0


class TestAuditReport:
    """Audit of an untouched k-server trace"""

    def test_check_names(self, star_kserver):
        report = audit_trace(star_kserver, serve_sequence(star_kserver).trace.events)
        assert [result.name for result in report.invariants] == list(COMMON_CHECKS + KSERVER_CHECKS)
        assert report.events == len(serve_sequence(star_kserver).trace)

    def test_beta_and_rows(self, star_kserver):
        state = serve_sequence(star_kserver)
        report = audit_trace(star_kserver, state.trace.events)
        assert report.beta_measured > 0
        assert set(report.beta_by_node) == {"r"}
        assert [row.rid for row in report.requests] == [0, 1, 2]
        assert sum(row.dual_gained for row in report.requests) == pytest.approx(state.root_dual)

    def test_totals_only(self, star_kserver):
        report = audit_trace(star_kserver, serve_sequence(star_kserver).trace.events, checks=False)
        assert report.invariants == []
        assert report.movement_cost > 0

    def test_round_trip_through_disk(self, star_kserver, tmp_path):
        state = serve_sequence(star_kserver)
        path = state.trace.write(tmp_path / "trace.jsonl")
        from_disk = audit_trace(star_kserver, read_trace(path))
        in_memory = audit_trace(star_kserver, state.trace.events)
        assert from_disk.model_dump() == in_memory.model_dump()

    def test_invariant_table(self, star_kserver):
        report = audit_trace(star_kserver, serve_sequence(star_kserver).trace.events)
        table = invariant_table(report)
        assert list(table.columns) == ["check", "status", "checked", "worst", "first counterexample"]
        assert set(table["status"]) == {"ok"}


class TestTamperedTraces:
    """Edited traces must be caught"""

    def test_inflated_transfer(self, star_kserver):
        events = tampered(serve_sequence(star_kserver).trace.events, "transfer", double_pieces)
        report = audit_trace(star_kserver, events)
        failed = {result.name for result in report.failures()}
        assert "trace consistency" in failed

    def test_negative_rhs(self, star_kserver):
        def negate(event):
            event["rhs"] = -abs(event["rhs"])

        events = tampered(serve_sequence(star_kserver).trace.events, "constraint_added", negate)
        report = audit_trace(star_kserver, events)
        assert "positive rhs" in {result.name for result in report.failures()}

    def test_strict_raises(self, star_kserver):
        events = tampered(serve_sequence(star_kserver).trace.events, "transfer", double_pieces)
        auditor = TraceAuditor(star_kserver, strict=True)
        with pytest.raises(InvariantBreach) as info:
            for index, event in enumerate(events):
                auditor.feed(index, event)
        assert info.value.event_index is not None

    def test_counterexample_recorded(self, star_kserver):
        events = tampered(serve_sequence(star_kserver).trace.events, "transfer", double_pieces)
        report = audit_trace(star_kserver, events)
        failure = next(result for result in report.failures() if result.name == "trace consistency")
        assert failure.counterexample
        assert failure.event_index is not None


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
