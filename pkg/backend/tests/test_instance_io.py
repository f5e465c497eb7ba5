"""
Unit tests for the instance grammar, parameter derivation and random generation
"""
import json

import pytest

from models.instance import DuplicateTime, ParamViolation, ParseError, Timestep
from services.hst_builder import balanced_hst
from services.instance_io import (
    generate_random,
    instance_to_json,
    parse_instance,
    parse_window_law,
    render_instance,
    with_overrides,
)
from tests.conftest import star_text, two_level_text


class TestParseInstance:
    """Grammar and validation"""

    def test_star(self):
        instance = parse_instance(star_text("a 1 2", "b 3 4"))
        assert instance.k == 1
        assert [r.leaf for r in instance.requests] == ["a", "b"]
        assert instance.hst.dummy_leaves == ("dummy0", "dummy1")
        assert instance.n == 5
        assert not instance.is_time_windows

    def test_requests_sorted_by_arrival(self):
        instance = parse_instance(star_text("b 5 6", "a 1 2"))
        assert [(r.rid, r.leaf) for r in instance.requests] == [(0, "a"), (1, "b")]

    def test_overrides_kept_verbatim(self):
        instance = parse_instance(star_text("a 1 2"))
        assert instance.overrides == {"delta_prime": "0.3", "delta": "0.01", "gamma": "0.002"}
        assert instance.params.gamma == pytest.approx(0.002)

    def test_time_windows_detected(self):
        instance = parse_instance(star_text("a 1 4", "b 2 3"))
        assert instance.is_time_windows
        assert instance.event_times() == [1, 2, 3, 4]

    def test_comments_and_blank_lines(self):
        text = "# header\n\n" + star_text("a 1 2").replace("k 1", "k 1\n# servers")
        assert parse_instance(text).k == 1

    def test_missing_hst_line(self):
        with pytest.raises(ParseError) as info:
            parse_instance("node r - 1\n")
        assert info.value.line == 1

    def test_unknown_record(self):
        with pytest.raises(ParseError) as info:
            parse_instance(star_text("a 1 2") + "serve a 3\n")
        assert info.value.line == 10

    def test_unknown_param(self):
        with pytest.raises(ParseError):
            parse_instance(star_text().replace("param gamma", "param beta"))

    def test_request_at_internal_node(self):
        with pytest.raises(ParseError):
            parse_instance(star_text("r 1 2"))

    def test_request_at_dummy(self):
        with pytest.raises(ParseError):
            parse_instance(star_text("dummy0 1 2"))

    def test_duplicate_time(self):
        with pytest.raises(DuplicateTime):
            parse_instance(star_text("a 1 2", "b 2 3"))

    def test_window_before_arrival(self):
        with pytest.raises(ParseError):
            parse_instance(star_text("a 5 4"))

    def test_lambda_too_small(self):
        with pytest.raises(ParseError):
            parse_instance(star_text("a 1 2").replace("hst 20", "hst 5"))


class TestParameters:
    """Defaults and the inequality checks"""

    def test_small_tree_defaults_fail(self):
        text = "hst 20\nnode r - 1\nnode a r 0\nk 1\nrequest a 1 2\n"
        with pytest.raises(ParamViolation) as info:
            parse_instance(text)
        assert info.value.inequality == "δ ≥ 4γ"

    def test_delta_prime_inequality(self):
        text = star_text("a 1 2").replace("delta_prime 0.3", "delta_prime 0.05")
        with pytest.raises(ParamViolation) as info:
            parse_instance(text)
        assert info.value.inequality == "δ′ − 2δn > 0"

    def test_time_window_inequality(self):
        text = two_level_text("a 1 5", "c 2 3").replace("gamma 0.002", "gamma 0.004")
        with pytest.raises(ParamViolation) as info:
            parse_instance(text)
        assert info.value.inequality == "δ′ ≥ γnΔ"

    def test_same_gamma_passes_with_unit_windows(self):
        text = two_level_text("a 1 2", "c 3 4").replace("gamma 0.002", "gamma 0.004")
        assert parse_instance(text).params.gamma == pytest.approx(0.004)

    def test_leaves_measure(self):
        instance = parse_instance(star_text("a 1 2"))
        switched = with_overrides(instance, {"subtree_measure": "leaves"})
        assert switched.n == 4

    def test_unknown_override(self):
        instance = parse_instance(star_text("a 1 2"))
        with pytest.raises(ParamViolation):
            with_overrides(instance, {"beta": "1"})

    def test_m_override(self):
        instance = with_overrides(parse_instance(star_text("a 1 2")), {"m": "77"})
        assert instance.m_value() == 77


class TestRender:
    """Text and JSON export"""

    def test_render_parses_back(self):
        instance = parse_instance(two_level_text("a 1 2", "c 3 4"))
        again = parse_instance(render_instance(instance))
        assert render_instance(again) == render_instance(instance)
        assert again.params == instance.params

    def test_json_export(self):
        payload = json.loads(instance_to_json(parse_instance(star_text("a 1 2"))))
        assert payload["k"] == 1
        assert payload["requests"][0]["leaf"] == "a"
        assert {node["id"] for node in payload["nodes"]} == {"r", "a", "b"}


class TestGenerateRandom:
    """Seeded request streams"""

    @staticmethod
    def overrides():
        return {"delta_prime": "0.5", "delta": "0.002", "gamma": "0.0001"}

    def test_deterministic(self):
        tree = balanced_hst(4, 2, 20)
        first = generate_random(tree, 1, 12, parse_window_law("uniform:1:4"), 7, self.overrides())
        second = generate_random(tree, 1, 12, parse_window_law("uniform:1:4"), 7, self.overrides())
        assert render_instance(first) == render_instance(second)

    def test_times_distinct(self):
        tree = balanced_hst(4, 2, 20)
        instance = generate_random(tree, 1, 30, parse_window_law("geom:0.5"), 3, self.overrides())
        times = [t for r in instance.requests for t in (r.b, r.e)]
        assert len(times) == len(set(times))
        assert all(r.e > r.b for r in instance.requests)

    def test_unit_law_gives_kserver_instance(self):
        tree = balanced_hst(4, 2, 20)
        instance = generate_random(tree, 1, 10, parse_window_law("const:1"), 0, self.overrides())
        assert not instance.is_time_windows

    def test_bad_law(self):
        with pytest.raises(ValueError):
            parse_window_law("poisson:3")
        with pytest.raises(ValueError):
            parse_window_law("const:0")


class TestTimestep:
    """Lexicographic order of (q, tick)"""

    def test_order(self):
        assert Timestep(3, 5) < Timestep(4, 0)
        assert Timestep(3, 0).next() == Timestep(3, 1)
        assert Timestep.from_list([2, 7]).as_list() == [2, 7]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
