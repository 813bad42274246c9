"""
PDDL reading, grounding, printing and plan files
"""
from fractions import Fraction

import pytest

from models.exceptions import (
    GroundingError,
    NestedModality,
    NoUpperBound,
    PDDLSyntaxError,
    UnknownModalOperator,
    UnsupportedFeature,
)
from models.pddl_parser import (
    ground,
    load_task,
    parse_domain,
    parse_domain_file,
    parse_plan,
    parse_problem,
    print_domain,
    print_problem,
    read_sexpr,
)
from models.trajectory import Modality

from .conftest import DOMAIN, P, depots_task, problem_path

SMALL_PROBLEM = """
(define (problem tiny) (:domain depots-nohoist)
  (:objects D0 D3 - depot T0 - truck)
  (:init (at T0 D0) (link D0 D3) (= (travel-time D0 D3) 10))
  (:goal (and (at T0 D3)))
  (:constraints (and %s)))
"""


@pytest.fixture(scope="module")
def domain(domain_text):
    return parse_domain(domain_text)


class TestReader:
    def test_comments_and_lines(self):
        node = read_sexpr("; header\n(a\n  (b c) ; trailing\n  d)")
        assert node == ["a", ["b", "c"], "d"]
        assert node[1].line == 3

    def test_atoms_after_whitespace(self):
        assert read_sexpr("(a b)") == ["a", "b"]
        assert read_sexpr("(  define\t(domain x)\r\n  ?v - object)") == ["define", ["domain", "x"], "?v", "-", "object"]

    def test_domain_file_from_disk(self):
        domain = parse_domain_file(DOMAIN)
        assert domain.name == "depots-nohoist"
        task = load_task(DOMAIN, problem_path("within-25"))
        assert task.upper_bound == 25

    def test_unbalanced_parenthesis_reports_a_line(self):
        with pytest.raises(PDDLSyntaxError) as info:
            read_sexpr("(define (domain x)\n  (:predicates (p)")
        assert info.value.line is not None


class TestDomain:
    def test_depots_schemata(self, domain):
        assert domain.name == "depots-nohoist"
        assert [a.name for a in domain.actions] == ["drive", "load", "unload"]
        unload = domain.action("unload")
        assert unload.duration == Fraction(2)
        assert [str(a) for a in unload.s_cond] == ["(in ?c ?t)", "(clear ?s)", "(at ?s ?p)"]
        assert [str(a) for a in unload.e_add] == ["(at ?c ?p)", "(on ?c ?s)"]

    def test_print_then_parse_is_a_fixpoint(self, domain):
        again = parse_domain(print_domain(domain))
        assert again == domain
        assert print_domain(again) == print_domain(domain)

    @pytest.mark.parametrize(
        "action, token",
        [
            ("(:action a :parameters () :precondition () :effect ())", ":action"),
            (
                "(:durative-action a :parameters () :duration (<= ?duration 3) "
                ":condition () :effect ())",
                "duration constraint",
            ),
            (
                "(:durative-action a :parameters () :duration (= ?duration 3) "
                ":condition (at start (not (p))) :effect ())",
                "negative condition",
            ),
            (
                "(:durative-action a :parameters () :duration (= ?duration 3) "
                ":condition () :effect (at end (increase (f) 1)))",
                "increase",
            ),
        ],
    )
    def test_unsupported_constructs(self, action, token):
        text = f"(define (domain x) (:requirements :strips :durative-actions) (:predicates (p)) (:functions (f)) {action})"
        with pytest.raises(UnsupportedFeature) as info:
            parse_domain(text)
        assert token in str(info.value)

    def test_unknown_requirement(self):
        with pytest.raises(UnsupportedFeature):
            parse_domain("(define (domain x) (:requirements :adl))")

    def test_undeclared_predicate(self):
        text = (
            "(define (domain x) (:predicates (p))"
            " (:durative-action a :parameters () :duration (= ?duration 1)"
            " :condition (at start (q)) :effect ()))"
        )
        with pytest.raises(PDDLSyntaxError):
            parse_domain(text)


class TestProblem:
    def test_within_problem(self, domain, problem_text):
        problem = parse_problem(problem_text("within-25"), domain)
        assert problem.goals == ()
        [c] = problem.constraints
        assert c.op is Modality.WITHIN and c.t == 25
        assert c.phi == (P("at C0 D2"),)

    def test_every_fixture_problem_parses(self, domain, problem_text):
        names = [
            "within-20", "within-25", "within-40", "two-deadlines", "always-clear", "always-within",
            "hold-during", "at-end", "swap", "swap-at-most-once",
        ]
        for name in names:
            problem = parse_problem(problem_text(name), domain)
            assert problem.constraints, name

    def test_print_then_parse_is_a_fixpoint(self, domain, problem_text):
        problem = parse_problem(problem_text("hold-during"), domain)
        assert parse_problem(print_problem(problem), domain) == problem

    def test_at_end_is_modal_but_at_atom_is_not(self, domain):
        problem = parse_problem(SMALL_PROBLEM % "(at end (at T0 D3))", domain)
        assert problem.goals[0].predicate == "at"
        assert problem.constraints[0].op is Modality.AT_END

    def test_modal_operators_in_the_goal(self, domain):
        text = SMALL_PROBLEM.replace("(:goal (and (at T0 D3)))", "(:goal (and (at T0 D3) (sometime (at T0 D0))))")
        problem = parse_problem(text % "", domain)
        assert [c.op for c in problem.constraints] == [Modality.SOMETIME]

    def test_nested_modality_rejected(self, domain):
        with pytest.raises(NestedModality):
            parse_problem(SMALL_PROBLEM % "(within 10 (always (at T0 D0)))", domain)

    def test_unknown_operator_rejected(self, domain):
        with pytest.raises(UnknownModalOperator):
            parse_problem(SMALL_PROBLEM % "(eventually (at T0 D3))", domain)

    def test_preferences_rejected(self, domain):
        with pytest.raises(UnsupportedFeature):
            parse_problem(SMALL_PROBLEM % "(preference p1 (sometime (at T0 D3)))", domain)

    def test_hold_during_needs_ordered_bounds(self, domain):
        with pytest.raises(PDDLSyntaxError):
            parse_problem(SMALL_PROBLEM % "(hold-during 10 0 (at T0 D0))", domain)

    def test_timed_initial_literals(self, domain):
        text = SMALL_PROBLEM.replace("(link D0 D3)", "(link D0 D3) (at 5 (not (at T0 D0)))")
        problem = parse_problem(text % "", domain)
        assert problem.tils[0][0] == 5 and problem.tils[0][2] is False


class TestGrounding:
    def test_drive_only_along_links(self):
        task = depots_task("within-25")
        drives = sorted(a.label for a in task.actions if a.name == "drive")
        assert len(drives) == 8
        assert "(drive T0 D0 D3)" in drives
        assert "(drive T0 D0 D2)" not in drives
        assert task.find_action("(drive T0 D0 D1)").dur == 15

    def test_swap_adds_the_d1_d3_link(self):
        task = depots_task("swap")
        assert task.find_action("(drive T0 D1 D3)").dur == 12
        assert task.upper_bound == 50

    def test_horizon_from_latest_deadline_or_override(self):
        assert depots_task("two-deadlines").upper_bound == 35
        assert depots_task("within-25", upper_bound=Fraction(30)).upper_bound == 30

    def test_deadlines_collected_from_within(self):
        task = depots_task("two-deadlines")
        assert task.deadline_map == {P("at C0 D2"): 25, P("at C1 D2"): 35}

    def test_static_facts(self):
        task = depots_task("within-25")
        assert P("link D0 D3") in task.static_props
        assert P("at T0 D0") not in task.static_props

    def test_no_deadline_and_no_bound(self, domain):
        problem = parse_problem(SMALL_PROBLEM % "", domain)
        with pytest.raises(NoUpperBound):
            ground(domain, problem)
        assert ground(domain, problem, upper_bound=Fraction(12)).upper_bound == 12

    def test_unknown_object_in_constraint(self, domain):
        problem = parse_problem(SMALL_PROBLEM % "(within 10 (at T9 D3))", domain)
        with pytest.raises(GroundingError):
            ground(domain, problem)


class TestPlanFiles:
    def test_read_hand_written_plan(self, task25, d3_plan_text):
        plan = parse_plan(d3_plan_text, task25)
        assert len(plan) == 4
        assert plan.makespan == Fraction(24003, 1000)
        assert parse_plan(plan.to_ipc(), task25) == plan

    def test_unknown_action(self, task25):
        with pytest.raises(GroundingError):
            parse_plan("0: (fly T0 D0 D2) [1]", task25)

    def test_wrong_duration(self, task25):
        with pytest.raises(GroundingError):
            parse_plan("0: (drive T0 D0 D3) [9]", task25)

    def test_malformed_line(self, task25):
        with pytest.raises(PDDLSyntaxError) as info:
            parse_plan("0: (load C0 T0 P0 D0) [2]\nnonsense", task25)
        assert info.value.line == 2
