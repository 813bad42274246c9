"""
Search over partial plans: root analysis, pruning and the solution guarantees
"""
import random
from fractions import Fraction

import pytest

from models.core_model import DurativeAction, GroundedTask, TemporalPlan, reconstruct_trajectory
from models.exceptions import ResourceLimit
from models.reporting import validate_plan
from models.search import (
    PruneLog,
    Solution,
    Unsolvable,
    _child,
    build_root_tlg,
    candidate_starts,
    constraint_props,
    enumerate_plans,
    expand,
    root_node,
    solve,
    successors,
    update_node_tlg,
    wait_points,
)
from models.trajectory import (
    ALWAYS_VIOLATION,
    HOLD_DURING_VIOLATION,
    TLG_INCONSISTENT,
    Modality,
    TrajectoryConstraint,
    holds_semantics,
)

from .conftest import P, depots_task, property_count

MOVE = DurativeAction(
    "move",
    ("r", "a", "b"),
    Fraction(5),
    s_cond=frozenset({P("at r a")}),
    s_del=frozenset({P("at r a")}),
    e_add=frozenset({P("at r b")}),
)
PAINT = DurativeAction(
    "paint",
    ("r",),
    Fraction(2),
    s_cond=frozenset({P("at r b")}),
    inv=frozenset({P("at r b")}),
    e_add=frozenset({P("painted r")}),
)


def _small_task(deadline=10, extra=()):
    within = TrajectoryConstraint(Modality.WITHIN, (P("painted r"),), t=Fraction(deadline))
    props = {P("at r a"), P("at r b"), P("painted r")}
    return GroundedTask(
        props=frozenset(props),
        actions=(MOVE, PAINT),
        init=frozenset({P("at r a")}),
        goals=frozenset(),
        deadlines=((P("painted r"), Fraction(deadline)),),
        constraints=(within,) + tuple(extra),
        upper_bound=Fraction(deadline),
        name="paint",
    )


def _assert_valid(task, solution):
    traj = reconstruct_trajectory(task, solution.plan)
    assert task.goals <= traj.final.state
    for c in task.constraints:
        assert holds_semantics(traj, c), str(c)
    assert solution.makespan <= task.upper_bound


class TestCandidateStarts:
    def test_happenings_and_their_epsilon_successors(self):
        task = _small_task()
        plan_traj = reconstruct_trajectory(task, TemporalPlan().extend(MOVE, Fraction(0)))
        starts = candidate_starts(plan_traj, Fraction(0), (), task.epsilon)
        assert starts == [Fraction(0), Fraction(1, 1000), Fraction(5), Fraction(5001, 1000)]

    def test_earlier_happenings_are_not_revisited(self):
        task = _small_task()
        plan_traj = reconstruct_trajectory(task, TemporalPlan().extend(MOVE, Fraction(0)))
        assert min(candidate_starts(plan_traj, Fraction(5), (), task.epsilon)) == 5

    def test_wait_points_come_from_constraints(self):
        assert wait_points(depots_task("hold-during")) == (Fraction(0), Fraction(10), Fraction(40))
        assert wait_points(_small_task(7)) == (Fraction(7),)


class TestSuccessors:
    def _hold_task(self):
        hold = TrajectoryConstraint(Modality.HOLD_DURING, (P("at r a"),), u1=Fraction(0), u2=Fraction(3))
        return _small_task(20, extra=(hold,))

    def test_each_action_starts_at_its_first_time_and_at_wait_points(self):
        task = self._hold_task()
        root = root_node(task, None)
        waits = wait_points(task)
        assert [c.now for c in successors(task, root, waits)] == [0, 3]
        assert [c.now for c in successors(task, root, waits, earliest_only=False)] == [0, Fraction(1, 1000), 3]

    def test_paint_waits_for_the_arrival(self):
        task = _small_task()
        moved = successors(task, root_node(task, None))[0]
        assert [c.now for c in successors(task, moved, wait_points(task))] == [Fraction(5001, 1000)]

    def test_constraint_propositions_are_watched(self):
        assert constraint_props(self._hold_task()) == {P("painted r"), P("at r a")}


class TestSmallTask:
    def test_optimal_plan(self):
        task = _small_task()
        result = solve(task)
        assert isinstance(result, Solution)
        assert [s.action.name for s in result.plan.steps] == ["move", "paint"]
        assert result.makespan == Fraction(7001, 1000)
        _assert_valid(task, result)

    def test_pruned_and_unpruned_search_agree_with_enumeration(self):
        task = _small_task(9)
        best = min(p.makespan for p in enumerate_plans(task, max_steps=3))
        assert solve(task).makespan == best
        assert solve(task, prune=False).makespan == best

    def test_deadline_too_tight(self):
        result = solve(_small_task(6))
        assert isinstance(result, Unsolvable)
        assert result.before_search
        assert result.reason == TLG_INCONSISTENT
        assert result.stats.nodes_expanded == 0

    def test_enumeration_finds_nothing_below_the_bound(self):
        assert list(enumerate_plans(_small_task(6), max_steps=3)) == []

    def test_expand_records_pruned_children(self):
        hold = TrajectoryConstraint(
            Modality.HOLD_DURING, (P("at r a"),), u1=Fraction(0), u2=Fraction(3)
        )
        task = _small_task(20, extra=(hold,))
        analysis = build_root_tlg(task)
        log = PruneLog()
        kept = expand(root_node(task, analysis.tlg), task, analysis.compiled, log=log)
        starts = {c.plan.steps[0].start for c in kept if c.plan.steps[0].action == MOVE}
        assert not [s for s in starts if 0 < s < 3]
        assert Fraction(3) in starts
        assert log.with_reason(HOLD_DURING_VIOLATION)
        assert all(c.tlg is not analysis.tlg for c in kept)


class TestDepots:
    def test_within_25(self, task25):
        result = solve(task25)
        assert isinstance(result, Solution)
        _assert_valid(task25, result)
        assert result.makespan > 24

    def test_within_20_fails_before_search(self, task20):
        result = solve(task20)
        assert isinstance(result, Unsolvable)
        assert result.before_search
        assert result.landmark == "(at C0 D2)"
        assert result.stats.nodes_expanded == 0

    def test_two_deadlines_fail_before_search(self):
        result = solve(depots_task("two-deadlines"))
        assert isinstance(result, Unsolvable)
        assert result.before_search
        assert result.stats.nodes_expanded == 0
        assert "min_v(at C0 D2)=32 > max_g=25" in result.witness

    def test_node_limit(self, task25):
        with pytest.raises(ResourceLimit) as info:
            solve(task25, max_nodes=1)
        assert info.value.exit_code == 3

    @pytest.mark.slow
    def test_always_clear_routes_around_the_pallet(self):
        task = depots_task("always-clear")
        result = solve(task)
        assert isinstance(result, Solution)
        _assert_valid(task, result)
        unloads = [s.action for s in result.plan.steps if s.action.name == "unload"]
        assert unloads and all("P2" not in a.params for a in unloads)
        assert result.prune_log.with_reason(ALWAYS_VIOLATION)

    @pytest.mark.slow
    def test_hold_during_keeps_the_truck_home(self):
        task = depots_task("hold-during")
        result = solve(task)
        assert isinstance(result, Solution)
        _assert_valid(task, result)
        drives = [s for s in result.plan.steps if s.action.name == "drive"]
        assert min(s.start for s in drives) >= 10

    @pytest.mark.slow
    def test_at_end_leaves_the_truck_at_d3(self):
        task = depots_task("at-end")
        result = solve(task)
        assert isinstance(result, Solution)
        _assert_valid(task, result)
        assert P("at T0 D3") in result.trajectory.final.state

    @pytest.mark.slow
    def test_swap_visits_d1_before_d3(self, swap_task):
        result = solve(swap_task, jobs=2)
        assert isinstance(result, Solution)
        _assert_valid(swap_task, result)
        arrivals = [s.end for s in result.plan.steps if s.action.name == "drive" and s.action.params[2] == "D3"]
        assert len(arrivals) == 1
        to_d1 = [s.end for s in result.plan.steps if s.action.name == "drive" and s.action.params[2] == "D1"]
        assert min(to_d1) < arrivals[0]
        assert result.makespan <= 50
        assert result.prune_log.with_reason("at-most-once-violation")


class TestNodeGraphs:
    def _node(self, task, analysis, *steps):
        node = root_node(task, analysis.tlg)
        for label, start in steps:
            node = _child(task, node, task.find_action(label), Fraction(start))
            assert node is not None
        return node

    def test_root_orders_d1_before_d3_under_at_most_once(self, swap_task):
        analysis = build_root_tlg(swap_task)
        assert analysis.consistency
        assert analysis.tlg.ordered((P("at T0 D1"), 0), (P("at T0 D3"), 0))

    def test_reaching_d3_first_breaks_at_most_once(self, swap_task):
        analysis = build_root_tlg(swap_task)
        node = self._node(swap_task, analysis, ("(drive T0 D0 D3)", 0), ("(load C2 T0 P4 D3)", Fraction(10001, 1000)))
        result = update_node_tlg(swap_task, node)
        assert not result
        assert result.reason == "at-most-once-violation"

    def test_reaching_d1_first_stays_consistent(self, swap_task):
        analysis = build_root_tlg(swap_task)
        node = self._node(swap_task, analysis, ("(drive T0 D0 D1)", 0), ("(load C1 T0 P1 D1)", Fraction(15001, 1000)))
        assert update_node_tlg(swap_task, node)
        assert node.tlg.landmark(P("at T0 D1")).achieved_at == 15

    def test_initial_fact_deleted_at_zero_is_a_closed_occurrence(self, task25):
        analysis = build_root_tlg(task25)
        node = self._node(task25, analysis, ("(drive T0 D0 D3)", 0))
        update_node_tlg(task25, node)
        home = node.tlg.landmark(P("at T0 D0"))
        assert (home.achieved_at, home.closed_at) == (0, 0)

    def test_leaving_d3_before_the_end_defers_to_a_second_visit(self):
        task = depots_task("at-end")
        analysis = build_root_tlg(task)
        node = self._node(
            task,
            analysis,
            ("(load C0 T0 P0 D0)", 0),
            ("(drive T0 D0 D3)", 2),
            ("(drive T0 D3 D2)", Fraction(12001, 1000)),
        )
        assert update_node_tlg(task, node)
        first, second = node.tlg.occurrences(P("at T0 D3"))[:2]
        assert (first.achieved_at, first.closed_at) == (12, Fraction(12001, 1000))
        assert second.achieved_at is None


# ---------------------------------------------------------------------------
# Random small tasks against enumeration
# ---------------------------------------------------------------------------


def _random_task(rng: random.Random, name: str) -> GroundedTask:
    """A robot that moves between two or three rooms and paints them"""
    rooms = [f"l{i}" for i in range(rng.randint(2, 3))]
    at = {r: P(f"at r {r}") for r in rooms}
    clean = {r: P(f"clean {r}") for r in rooms}
    painted = {r: P(f"painted {r}") for r in rooms}
    actions = [
        DurativeAction(
            "move",
            ("r", a, b),
            Fraction(rng.randint(2, 6)),
            s_cond=frozenset({at[a]}),
            s_del=frozenset({at[a]}),
            e_add=frozenset({at[b]}),
        )
        for a in rooms
        for b in rooms
        if a != b and rng.random() < 0.7
    ]
    actions += [
        DurativeAction(
            "paint",
            ("r", r),
            Fraction(rng.randint(2, 4)),
            s_cond=frozenset({at[r], clean[r]}),
            inv=frozenset({at[r]}),
            s_del=frozenset({clean[r]}),
            e_add=frozenset({painted[r]}),
        )
        for r in rooms
    ]
    horizon = rng.randint(8, 30)
    constraints = [TrajectoryConstraint(Modality.WITHIN, (painted[rng.choice(rooms)],), t=Fraction(rng.randint(4, horizon)))]
    for _ in range(rng.randint(0, 2)):
        op = rng.choice([Modality.AT_END, Modality.AT_MOST_ONCE, Modality.SOMETIME, Modality.WITHIN])
        prop = rng.choice([at, painted])[rng.choice(rooms)]
        timed = {"t": Fraction(rng.randint(4, horizon))} if op is Modality.WITHIN else {}
        constraints.append(TrajectoryConstraint(op, (prop,), **timed))
    return GroundedTask(
        props=frozenset(at.values()) | frozenset(clean.values()) | frozenset(painted.values()),
        actions=tuple(actions),
        init=frozenset({at[rooms[0]]}) | frozenset(clean.values()),
        goals=frozenset(),
        deadlines=tuple((c.prop, c.t) for c in constraints if c.op is Modality.WITHIN),
        constraints=tuple(constraints),
        upper_bound=Fraction(horizon),
        name=name,
    )


@pytest.mark.parametrize("seed", range(2))
def test_random_tasks_agree_with_enumeration(seed):
    rng = random.Random(seed)
    for k in range(property_count(10, 100)):
        task = _random_task(rng, f"random-{seed}-{k}")
        enumerated = next(enumerate_plans(task, max_steps=5, earliest_only=True), None)
        result = solve(task, max_seconds=120)
        if enumerated is not None:
            assert isinstance(result, Solution), (task.name, [str(c) for c in task.constraints], result.witness)
        if isinstance(result, Solution):
            assert validate_plan(task, result.plan).valid, task.name
            _assert_valid(task, result)
            plans = {p.sort_key for p in enumerate_plans(task, max_steps=len(result.plan), earliest_only=True)}
            assert result.plan.sort_key in plans, task.name
