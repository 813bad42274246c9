"""
Trajectory constraints: operator semantics, compilation and partial-plan pruning
"""
import random
from fractions import Fraction

import pytest

from models.core_model import Happening, StateTrajectory
from models.search import _child, root_node
from models.trajectory import (
    ALWAYS_VIOLATION,
    AT_MOST_ONCE_VIOLATION,
    HOLD_DURING_VIOLATION,
    KEEP,
    WITHIN_EXPIRED,
    EndpointConstraint,
    Modality,
    PruneClass,
    TrajectoryConstraint,
    compile,
    holds_semantics,
    landmarks_created,
    prune_check,
)

from .conftest import P, depots_task, property_count

A, B = P("a"), P("b")


def traj(*happenings):
    """``traj((0, "a"), (2, "a b"))``"""
    return StateTrajectory(
        tuple(Happening(Fraction(t), frozenset(P(name) for name in names.split())) for t, names in happenings)
    )


def tc(op, phi=(A,), psi=(), **kw):
    kw = {k: Fraction(v) for k, v in kw.items()}
    return TrajectoryConstraint(Modality(op), tuple(phi), tuple(psi), **kw)


class _Landmarks:
    def __init__(self, *props):
        self.props = set(props)

    def has_landmark(self, prop):
        return prop in self.props


class TestConstraintRecord:
    def test_requires_two_descriptors_for_binary_operators(self):
        with pytest.raises(ValueError):
            tc("sometime-after", phi=(A,))

    def test_requires_time_bound(self):
        with pytest.raises(ValueError):
            TrajectoryConstraint(Modality.WITHIN, (A,))

    @pytest.mark.parametrize("u1, u2", [(5, 5), (6, 5), (-1, 3)])
    def test_hold_during_window_must_be_proper(self, u1, u2):
        with pytest.raises(ValueError):
            tc("hold-during", u1=u1, u2=u2)

    def test_pddl_rendering(self):
        assert str(tc("within", t=25)) == "(within 25 (a))"
        assert str(tc("at-end", phi=(A, B))) == "(at end (and (a) (b)))"
        assert str(tc("hold-during", u1=0, u2=10)) == "(hold-during 0 10 (a))"


class TestSemantics:
    def test_at_end_and_always(self):
        t = traj((0, "a"), (2, "a b"), (4, "b"))
        assert holds_semantics(t, tc("at-end", phi=(B,)))
        assert not holds_semantics(t, tc("at-end"))
        assert not holds_semantics(t, tc("always"))
        assert holds_semantics(traj((0, "a"), (3, "a b")), tc("always"))

    def test_within_is_inclusive(self):
        t = traj((0, ""), (5, "a"))
        assert holds_semantics(t, tc("within", t=5))
        assert not holds_semantics(t, tc("within", t=Fraction(4999, 1000)))

    def test_at_most_once_counts_blocks(self):
        assert holds_semantics(traj((0, ""), (1, "a"), (2, "a"), (3, "")), tc("at-most-once"))
        assert not holds_semantics(traj((0, "a"), (1, ""), (2, "a")), tc("at-most-once"))
        assert holds_semantics(traj((0, "")), tc("at-most-once"))

    def test_always_within_measures_from_each_trigger(self):
        c = tc("always-within", phi=(A,), psi=(B,), t=3)
        assert holds_semantics(traj((0, "a"), (3, "b")), c)
        assert not holds_semantics(traj((0, "a"), (4, "b")), c)
        assert not holds_semantics(traj((0, ""), (1, "a"), (2, "")), c)

    def test_sometime_before_needs_a_strictly_earlier_state(self):
        c = tc("sometime-before", phi=(A,), psi=(B,))
        assert holds_semantics(traj((0, "b"), (1, "a")), c)
        assert not holds_semantics(traj((0, "a b")), c)
        assert holds_semantics(traj((0, ""), (1, "b")), c)

    def test_sometime_after(self):
        c = tc("sometime-after", phi=(A,), psi=(B,))
        assert holds_semantics(traj((0, "a"), (1, "b")), c)
        assert holds_semantics(traj((0, "a b")), c)
        assert not holds_semantics(traj((0, "b"), (1, "a")), c)

    def test_hold_during_uses_the_state_current_at_the_window_start(self):
        c = tc("hold-during", u1=2, u2=6)
        assert holds_semantics(traj((0, "a"), (6, ""), (8, "")), c)
        assert not holds_semantics(traj((0, ""), (3, "a"), (8, "")), c)
        assert not holds_semantics(traj((0, "a"), (5, ""), (8, "")), c)

    def test_hold_during_after_the_plan_ends_needs_the_final_state(self):
        c = tc("hold-during", u1=10, u2=20)
        assert holds_semantics(traj((0, ""), (4, "a")), c)
        assert not holds_semantics(traj((0, "a"), (4, "")), c)

    def test_hold_after(self):
        c = tc("hold-after", t=3)
        assert holds_semantics(traj((0, ""), (4, "a"), (5, "")), c)
        assert not holds_semantics(traj((0, "a"), (3, "a"), (5, "")), c)
        assert holds_semantics(traj((0, ""), (2, "a")), c)

    def test_persistence_ignores_the_final_block(self):
        c = tc("persistence", t=2)
        assert holds_semantics(traj((0, "a"), (2, ""), (3, "a")), c)
        assert not holds_semantics(traj((0, "a"), (1, ""), (3, "")), c)

    def test_within_from_end(self):
        c = tc("hold-within-from-end", phi=(A,), psi=(B,), t=2)
        assert holds_semantics(traj((0, "a"), (3, ""), (5, "b")), c)
        assert not holds_semantics(traj((0, "a"), (3, ""), (6, "b")), c)

    def test_overlaps_and_during(self):
        t = traj((0, ""), (1, "a"), (2, "a b"), (3, "b"), (4, ""))
        assert holds_semantics(t, tc("overlaps", phi=(A,), psi=(B,)))
        assert not holds_semantics(t, tc("during", phi=(A,), psi=(B,)))
        inner = traj((0, ""), (1, "b"), (2, "a b"), (3, "b"), (4, ""))
        assert holds_semantics(inner, tc("during", phi=(A,), psi=(B,)))


def _random_traj(rng: random.Random) -> StateTrajectory:
    n = rng.randint(1, 6)
    times = sorted(rng.sample(range(1, 30), n - 1))
    names = ["", "a", "b", "a b"]
    return traj(*[(t, rng.choice(names)) for t in [0] + times])


@pytest.mark.parametrize("seed", [3, 17, 101])
def test_operator_relationships_on_random_trajectories(seed):
    rng = random.Random(seed)
    for _ in range(property_count(200, 5000)):
        t = _random_traj(rng)
        always = holds_semantics(t, tc("always"))
        sometime = holds_semantics(t, tc("sometime"))
        bound = Fraction(rng.randint(0, 30))
        within = holds_semantics(t, tc("within", t=bound))
        assert not always or sometime
        assert not within or sometime
        assert not within or holds_semantics(t, tc("within", t=bound + 5))
        assert holds_semantics(t, tc("at-most-once")) == (len(t.blocks([A])) <= 1)
        # a conjunction implies each conjunct
        if holds_semantics(t, tc("always", phi=(A, B))):
            assert always
        if not sometime:
            for op in ("always-within", "sometime-after", "sometime-before"):
                assert holds_semantics(t, tc(op, phi=(A,), psi=(B,), **({"t": 1} if op == "always-within" else {})))
        if holds_semantics(t, tc("sometime-before", phi=(A,), psi=(B,))):
            assert not t.holds(0, [A])


class TestCompile:
    T_N = Fraction(40)

    def test_within_bounds_generation_and_is_deadline_checkable(self):
        cc = compile(tc("within", t=25), _Landmarks(), self.T_N)
        assert cc.new_landmarks == (A,)
        assert [str(r) for r in cc.relations] == ["max_g(a) <= 25"]
        assert cc.prune_class is PruneClass.DEADLINE_CHECKABLE
        assert cc.deadline == 25

    def test_always_pins_validity_to_the_whole_plan(self):
        cc = compile(tc("always"), _Landmarks(), self.T_N)
        assert {str(r) for r in cc.relations} == {"min_v(a) = 0", "min_n(a) = 0", "max_v(a) = 40", "max_n(a) = 40"}
        assert cc.prune_class is PruneClass.ALWAYS_CHECKABLE

    def test_at_end_pins_validity_and_necessity_to_the_end(self):
        cc = compile(tc("at-end"), _Landmarks(), self.T_N)
        assert cc.new_landmarks == (A,)
        assert {str(r) for r in cc.relations} == {"max_v(a) = 40", "max_n(a) = 40"}

    @pytest.mark.parametrize(
        "u1, u2, expected",
        [
            (0, 10, {"min_n(a) <= 0", "max_n(a) = 10"}),
            (30, 50, {"min_n(a) <= 30", "max_n(a) = 40"}),
            (45, 50, {"min_n(a) = 40", "max_n(a) = 40"}),
        ],
    )
    def test_hold_during_window_against_the_horizon(self, u1, u2, expected):
        cc = compile(tc("hold-during", u1=u1, u2=u2), _Landmarks(), self.T_N)
        assert {str(r) for r in cc.relations} == expected

    def test_conditional_operators_need_phi_to_be_a_landmark(self):
        c = tc("sometime-after", phi=(A,), psi=(B,))
        assert landmarks_created(c, _Landmarks().has_landmark) == ()
        assert compile(c, _Landmarks(), self.T_N).relations == ()
        cc = compile(c, _Landmarks(A), self.T_N)
        assert cc.new_landmarks == (B,)
        assert [str(r) for r in cc.relations] == ["max_g(a) <= max_v(b)"]

    def test_always_within_orders_the_response(self):
        cc = compile(tc("always-within", phi=(A,), psi=(B,), t=22), _Landmarks(A), self.T_N)
        assert [str(r) for r in cc.relations] == ["max_g(b) <= max_g(a) + 22"]

    def test_persistence_offsets_against_its_own_necessity(self):
        cc = compile(tc("persistence", t=3), _Landmarks(A), self.T_N)
        assert [str(r) for r in cc.relations] == ["max_g(a) <= max_n(a) - 3"]

    def test_at_most_once_creates_nothing(self):
        cc = compile(tc("at-most-once"), _Landmarks(), self.T_N)
        assert cc.new_landmarks == ()
        assert cc.relations == ()

    def test_unknown_endpoint_is_rejected(self):
        with pytest.raises(ValueError):
            EndpointConstraint(A, "min_x")


class TestPruneCheck:
    @pytest.fixture(scope="class")
    def hold_task(self):
        return depots_task("hold-during")

    def _node(self, task, *steps):
        node = root_node(task, None)
        for label, start in steps:
            node = _child(task, node, task.find_action(label), Fraction(start))
            assert node is not None
        return node

    def _compiled(self, task, op):
        return [compile(c, _Landmarks(), task.upper_bound) for c in task.constraints if c.op is Modality(op)]

    def test_delete_inside_the_window_prunes(self, hold_task):
        node = self._node(hold_task, ("(drive T0 D0 D3)", 3))
        decision = prune_check(node, self._compiled(hold_task, "hold-during"))
        assert decision.reason == HOLD_DURING_VIOLATION

    def test_leaving_when_the_window_closes_is_kept(self, hold_task):
        node = self._node(hold_task, ("(drive T0 D0 D3)", 10))
        assert prune_check(node, self._compiled(hold_task, "hold-during")) is KEEP

    def test_delete_at_the_window_start_is_caught_once_fixed(self, hold_task):
        node = self._node(hold_task, ("(drive T0 D0 D3)", 0), ("(load C2 T0 P4 D3)", Fraction(10001, 1000)))
        assert prune_check(node, self._compiled(hold_task, "hold-during")).reason == HOLD_DURING_VIOLATION

    def test_always_violation(self):
        task = depots_task("always-clear")
        compiled = self._compiled(task, "always")
        node = self._node(
            task,
            ("(load C0 T0 P0 D0)", 0),
            ("(drive T0 D0 D3)", Fraction(2001, 1000)),
            ("(drive T0 D3 D2)", Fraction(12002, 1000)),
        )
        assert prune_check(node, compiled) is KEEP
        unloaded = _child(task, node, task.find_action("(unload C0 T0 P2 D2)"), Fraction(22003, 1000))
        assert prune_check(unloaded, compiled).reason == ALWAYS_VIOLATION

    def test_within_expires_once_time_passes_the_deadline(self):
        task = depots_task("within-20")
        compiled = self._compiled(task, "within")
        node = self._node(task, ("(drive T0 D0 D3)", 21))
        node.horizon = None
        assert prune_check(node, compiled).reason == WITHIN_EXPIRED
        early = self._node(task, ("(drive T0 D0 D3)", 0))
        early.horizon = None
        assert prune_check(early, compiled) is KEEP

    def test_second_occurrence_prunes_at_most_once(self, swap_task):
        compiled = self._compiled(swap_task, "at-most-once")
        once = self._node(swap_task, ("(drive T0 D0 D3)", 0), ("(drive T0 D3 D0)", Fraction(10001, 1000)))
        assert prune_check(once, compiled) is KEEP
        twice = _child(swap_task, once, swap_task.find_action("(drive T0 D0 D3)"), Fraction(20002, 1000))
        assert prune_check(twice, compiled).reason == AT_MOST_ONCE_VIOLATION

    def test_finished_plan_only_constraints_never_prune(self):
        task = depots_task("at-end")
        node = self._node(task, ("(drive T0 D0 D1)", 0))
        compiled = [compile(c, _Landmarks(), task.upper_bound) for c in task.constraints]
        assert all(
            cc.prune_class is not PruneClass.FINISHED_PLAN_ONLY or prune_check(node, [cc]) is KEEP for cc in compiled
        )
