"""
Plan validation reports and landmarks graph rendering
"""
import json
from fractions import Fraction

from models.pddl_parser import parse_plan
from models.reporting import (
    render_result_text,
    render_tlg_dot,
    render_tlg_text,
    render_validation_text,
    result_to_dict,
    validate_plan,
)
from models.search import build_root_tlg, solve

from .conftest import depots_task


class TestValidation:
    def test_d3_route_meets_the_25_deadline(self, task25, d3_plan_text):
        report = validate_plan(task25, parse_plan(d3_plan_text, task25))
        assert report.valid
        assert report.makespan == Fraction(24003, 1000)
        assert all(v.holds for v in report.verdicts)
        within = next(v for v in report.verdicts if v.constraint.startswith("(within 25"))
        assert within.time == Fraction(24003, 1000)

    def test_d3_route_misses_the_20_deadline(self, task20, d3_plan_text):
        report = validate_plan(task20, parse_plan(d3_plan_text, task20))
        assert not report.valid
        assert [v.constraint for v in report.violated] == ["(within 20 (at C0 D2))"]
        assert "FAIL (within 20 (at C0 D2))" in render_validation_text(report)

    def test_plan_that_does_not_execute(self, task25):
        plan = parse_plan("0: (unload C0 T0 P3 D2) [2]\n", task25)
        report = validate_plan(task25, plan)
        assert not report.valid
        assert report.error_type == "ConditionViolation"
        assert report.verdicts == []
        assert "execution error (ConditionViolation)" in render_validation_text(report)

    def test_always_clear_breaks_when_unloading_onto_p2(self):
        task = depots_task("always-clear")
        text = (
            "0: (load C0 T0 P0 D0) [2]\n2.001: (drive T0 D0 D3) [10]\n"
            "12.002: (drive T0 D3 D2) [10]\n22.003: (unload C0 T0 P2 D2) [2]\n"
        )
        report = validate_plan(task, parse_plan(text, task))
        (broken,) = report.violated
        assert broken.constraint == "(always (clear P2))"
        assert broken.time == Fraction(22003, 1000)

    def test_report_dict_uses_exact_times(self, task25, d3_plan_text):
        data = validate_plan(task25, parse_plan(d3_plan_text, task25)).to_dict()
        assert data["makespan"] == "24003/1000"
        json.dumps(data)


class TestGraphRendering:
    def test_dot_lists_every_landmark_and_ordering(self, task25):
        tlg = build_root_tlg(task25).tlg
        dot = render_tlg_dot(tlg, title="within-25")
        assert dot.startswith('digraph "within-25" {')
        assert dot.count("->") == tlg.graph.number_of_edges()
        assert '"(at C0 D2)"' in dot

    def test_text_shows_intervals(self, task25):
        text = render_tlg_text(build_root_tlg(task25).tlg, decimal=True)
        assert text.startswith("TLG: ")
        assert "horizon 25" in text
        assert "(at C0 D2)  g[22,25]" in text


class TestResults:
    def test_unsolvable_result(self, task20):
        result = solve(task20)
        data = result_to_dict(result)
        assert data["solved"] is False
        assert data["before_search"] is True
        assert data["landmark"] == "(at C0 D2)"
        assert "unsolvable (tlg-inconsistent) before search" in render_result_text(result)
