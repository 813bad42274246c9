"""
Forward search in the space of partial temporal plans.

Each node carries its plan, the trajectory the plan produces and a private
copy of the landmarks graph. Children are pruned by the trajectory
constraints that can already be judged and by inconsistencies of the
child's propagated graph. Nodes are expanded in order of makespan, ties
broken on the plan itself, so results do not depend on the number of
worker threads.
"""
import heapq
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import AbstractSet, Any, Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple, Union

from .core_model import (
    DurativeAction,
    GroundedTask,
    Proposition,
    PropSet,
    StateTrajectory,
    TemporalPlan,
    format_time,
    reconstruct_trajectory,
)
from .exceptions import (
    AtMostOnceViolation,
    ConditionViolation,
    GoalUnreachable,
    InfeasibleLandmark,
    MutexOverlap,
    ResourceLimit,
)
from .landmarks import LandmarkSet, OrderingKind, derive_temporal_landmarks, extract_causal_landmarks
from .tlg import (
    TLG,
    ConsistencyResult,
    Inconsistent,
    add_ordering,
    build_tlg,
    compute_mutex,
    defer_unmet_orderings,
    order_mutex_landmarks,
    record_achievement,
    resolve_conflicts,
)
from .trajectory import (
    KEEP,
    TLG_INCONSISTENT,
    CompiledConstraint,
    Prune,
    PruneDecision,
    holds_semantics,
    prune_check,
)
from .trpg import build_trpg

logger = logging.getLogger(__name__)


@dataclass
class PartialPlanNode:
    """A partial plan with the state at its last start time and its landmarks graph"""

    plan: TemporalPlan
    state: PropSet
    tlg: Optional[TLG]
    pending_ends: Tuple[Tuple[Fraction, DurativeAction], ...]
    now: Fraction
    trajectory: StateTrajectory
    violation: Optional[Prune] = None
    horizon: Optional[Fraction] = None

    @property
    def makespan(self) -> Fraction:
        return self.plan.makespan

    @property
    def depth(self) -> int:
        return len(self.plan)

    def key(self, watched: AbstractSet[Proposition] = frozenset()) -> Tuple[Any, ...]:
        """
        Nodes with equal keys have the same futures under constraints over
        ``watched``: the present state, the state just before it, the pending
        ends and the times the watched propositions changed.
        """
        before: Optional[PropSet] = None
        history: List[Tuple[Fraction, PropSet]] = []
        for h in self.trajectory.happenings:
            if h.time > self.now:
                break
            if h.time < self.now:
                before = h.state
            seen = h.state & watched
            if not history or history[-1][1] != seen:
                history.append((h.time, seen))
        return (
            self.now,
            self.makespan,
            self.state,
            before,
            tuple((t, a.key) for t, a in self.pending_ends),
            tuple(history),
        )

    def order_key(self) -> Tuple[Any, ...]:
        return (self.makespan, len(self.plan), self.plan.sort_key)


@dataclass(frozen=True)
class PruneRecord:
    plan: str
    reason: str
    detail: str = ""


@dataclass
class PruneLog:
    """Pruned nodes in the order they were discarded"""

    records: List[PruneRecord] = field(default_factory=list)

    def add(self, node: PartialPlanNode, decision: Prune):
        self.records.append(PruneRecord(node.plan.to_ipc().strip(), decision.reason, decision.detail))

    def reasons(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for r in self.records:
            counts[r.reason] = counts.get(r.reason, 0) + 1
        return counts

    def with_reason(self, reason: str) -> List[PruneRecord]:
        return [r for r in self.records if r.reason == reason]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    nodes_generated: int = 0
    nodes_pruned: int = 0
    duplicates: int = 0
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nodes_expanded": self.nodes_expanded,
            "nodes_generated": self.nodes_generated,
            "nodes_pruned": self.nodes_pruned,
            "duplicates": self.duplicates,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class Solution:
    plan: TemporalPlan
    trajectory: StateTrajectory
    tlg: Optional[TLG]
    stats: SearchStats
    prune_log: PruneLog

    solved = True

    @property
    def makespan(self) -> Fraction:
        return self.plan.makespan


@dataclass
class Unsolvable:
    witness: str
    reason: str
    stats: SearchStats
    prune_log: PruneLog
    landmark: Optional[str] = None
    chain: Tuple[str, ...] = ()
    # True when the landmarks graph proved it before any expansion
    before_search: bool = False

    solved = False


SearchResult = Union[Solution, Unsolvable]


@dataclass
class RootAnalysis:
    """Landmarks of a task and its root graph before and after propagation"""

    landmarks: LandmarkSet
    initial: TLG
    tlg: TLG
    compiled: List[CompiledConstraint]
    consistency: ConsistencyResult


# ---------------------------------------------------------------------------
# Root analysis
# ---------------------------------------------------------------------------


def build_root_tlg(task: GroundedTask, mutexes: Optional[AbstractSet[FrozenSet[Proposition]]] = None) -> RootAnalysis:
    """
    Extract and derive landmarks, build the root graph, then propagate it and
    settle the order of mutex landmarks where only one order is consistent.

    Raises:
        GoalUnreachable: a required proposition is relaxed-unreachable
        InfeasibleLandmark: a landmark cannot be generated before its deadline
    """
    mutexes = compute_mutex(task) if mutexes is None else mutexes
    lms = derive_temporal_landmarks(task, extract_causal_landmarks(task), mutexes)
    tlg, compiled = build_tlg(task, lms, build_trpg(task), mutexes)
    initial = tlg.copy()
    tlg, consistency = order_mutex_landmarks(tlg)
    if consistency:
        logger.info(f"✅ root graph consistent: {len(tlg)} landmarks, {tlg.graph.number_of_edges()} orderings")
    else:
        logger.info(f"❌ root graph inconsistent: {consistency}")
    return RootAnalysis(lms, initial, tlg, compiled, consistency)


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


def wait_points(task: GroundedTask) -> Tuple[Fraction, ...]:
    """Times named by constraints and timed literals; starts may be delayed to them"""
    points: Set[Fraction] = {til.time for til in task.tils}
    for c in task.constraints:
        points |= {t for t in (c.t, c.u1, c.u2) if t is not None}
    return tuple(sorted(points))


def constraint_props(task: GroundedTask) -> FrozenSet[Proposition]:
    """Propositions some trajectory constraint mentions"""
    return frozenset(p for c in task.constraints for p in c.phi + c.psi)


def candidate_starts(trajectory: StateTrajectory, now: Fraction, waits: Sequence[Fraction], epsilon: Fraction) -> List[Fraction]:
    """``now``, every later happening ``h`` and ``h + epsilon``, and later wait points"""
    times: Set[Fraction] = {now}
    for h in trajectory.times:
        if h >= now:
            times |= {h, h + epsilon}
    times |= {w for w in waits if w >= now}
    return sorted(times)


def _pre_state(task: GroundedTask, trajectory: StateTrajectory, t: Fraction) -> PropSet:
    state = task.init
    for h in trajectory.happenings:
        if h.time >= t:
            break
        state = h.state
    return state


def root_node(task: GroundedTask, tlg: Optional[TLG]) -> PartialPlanNode:
    plan = TemporalPlan()
    trajectory = reconstruct_trajectory(task, plan)
    return PartialPlanNode(
        plan=plan,
        state=trajectory.state_at(Fraction(0)),
        tlg=tlg,
        pending_ends=(),
        now=Fraction(0),
        trajectory=trajectory,
        horizon=task.upper_bound,
    )


def _child(task: GroundedTask, parent: PartialPlanNode, action: DurativeAction, start: Fraction) -> Optional[PartialPlanNode]:
    """The parent plan extended by ``action`` at ``start``; None when it does not execute"""
    if not action.s_cond <= _pre_state(task, parent.trajectory, start):
        return None
    plan = parent.plan.extend(action, start)
    try:
        trajectory = reconstruct_trajectory(task, plan)
    except (ConditionViolation, MutexOverlap):
        return None
    pending = tuple(sorted(((s.end, s.action) for s in plan.steps if s.end > start), key=lambda e: (e[0], e[1].key)))
    return PartialPlanNode(
        plan=plan,
        state=trajectory.state_at(start),
        tlg=parent.tlg,
        pending_ends=pending,
        now=start,
        trajectory=trajectory,
        horizon=parent.horizon,
    )


def _current_occurrence(tlg: TLG, prop: Proposition, at: Fraction) -> Optional[Any]:
    achieved = [lm for lm in tlg.occurrences(prop) if lm.achieved_at is not None and lm.achieved_at <= at]
    return achieved[-1].key if achieved else None


def _spans(task: GroundedTask, traj: StateTrajectory, prop: Proposition, now: Fraction) -> List[Tuple[Fraction, Optional[Fraction]]]:
    """(achieved, deleted) times of the blocks of ``prop`` begun by ``now``; deleted is None while it holds"""
    times = traj.times
    spans: List[Tuple[Fraction, Optional[Fraction]]] = []
    if prop in task.init and prop not in traj.happenings[0].state:
        # held initially and deleted by a step at time 0
        spans.append((Fraction(0), Fraction(0)))
    for i, j in traj.blocks([prop]):
        if times[i] > now:
            break
        closed = times[j + 1] if j + 1 < len(times) and times[j + 1] <= now else None
        spans.append((times[i], closed))
    return spans


def update_node_tlg(task: GroundedTask, node: PartialPlanNode) -> ConsistencyResult:
    """
    Give ``node`` its own graph: the earliest times from its state, the
    occurrences its plan has achieved or closed, the necessary orderings of
    the steps that achieved them, then propagation from fresh bounds.
    """
    tlg = node.tlg.copy()
    node.tlg = tlg
    pending_adds = [(s.end, p) for s in node.plan.steps if s.end > node.now for p in s.action.e_add]
    trpg = build_trpg(task, state=node.state, now=node.now, pending=pending_adds)
    tlg.earliest = dict(trpg.earliest)

    achieved = []
    for prop in sorted({lm.prop for lm in tlg.landmarks()}):
        occurrences = tlg.occurrences(prop)
        for k, (at, closed) in enumerate(_spans(task, node.trajectory, prop, node.now)):
            if k >= len(occurrences):
                break
            record_achievement(tlg, occurrences[k].key, at, closed)
            achieved.append((occurrences[k].key, at))

    try:
        for key, _ in achieved:
            if key in tlg:
                defer_unmet_orderings(tlg, key)
        for key, at in achieved:
            for step in node.plan.steps:
                if not ((step.start == at and key[0] in step.action.s_add) or (step.end == at and key[0] in step.action.e_add)):
                    continue
                for cond in sorted(step.action.conditions - task.static_props):
                    source = _current_occurrence(tlg, cond, step.start)
                    if source is not None and source != key:
                        add_ordering(tlg, source, key, OrderingKind.NECESSARY, [step.action])
    except AtMostOnceViolation as e:
        return Inconsistent(str(e), str(e.prop), "at-most-once-violation")
    return resolve_conflicts(tlg)


def is_goal(task: GroundedTask, node: PartialPlanNode) -> bool:
    """All goals hold at the end and every constraint holds on the trajectory"""
    if not task.goals <= node.trajectory.final.state:
        return False
    if node.horizon is not None and node.makespan > node.horizon:
        return False
    return all(holds_semantics(node.trajectory, c) for c in task.constraints)


# ---------------------------------------------------------------------------
# Expansion
# ---------------------------------------------------------------------------


def _evaluate(task: GroundedTask, child: PartialPlanNode, compiled: Sequence[CompiledConstraint], prune: bool) -> PruneDecision:
    decision = prune_check(child, compiled if prune else ())
    if not prune:
        return decision
    if decision or child.tlg is None:
        return decision
    result = update_node_tlg(task, child)
    if not result:
        return Prune(result.reason, result.witness)
    return KEEP


def successors(
    task: GroundedTask,
    node: PartialPlanNode,
    waits: Sequence[Fraction] = (),
    earliest_only: bool = True,
) -> List[PartialPlanNode]:
    """
    One-step extensions of ``node``, unevaluated. With ``earliest_only``
    each action starts at its first executable candidate time and again at
    every later wait point; otherwise at every executable candidate time.
    """
    starts = [s for s in candidate_starts(node.trajectory, node.now, waits, task.epsilon)
              if node.horizon is None or s < node.horizon]
    later_waits = set(waits)
    children: List[PartialPlanNode] = []
    for action in task.actions:
        first: Optional[Fraction] = None
        for start in starts:
            if earliest_only and first is not None and start not in later_waits:
                continue
            child = _child(task, node, action, start)
            if child is None:
                continue
            first = start if first is None else first
            children.append(child)
    children.sort(key=lambda c: (c.now, c.plan.sort_key))
    return children


def expand(
    node: PartialPlanNode,
    task: GroundedTask,
    compiled: Sequence[CompiledConstraint] = (),
    waits: Optional[Sequence[Fraction]] = None,
    prune: bool = True,
    log: Optional[PruneLog] = None,
    executor: Optional[ThreadPoolExecutor] = None,
) -> List[PartialPlanNode]:
    """
    Children of ``node`` that survive pruning, each with its own updated
    landmarks graph. Pruned children are recorded in ``log``.
    """
    waits = wait_points(task) if waits is None else waits
    children = successors(task, node, waits)
    if executor is not None:
        decisions = list(executor.map(lambda c: _evaluate(task, c, compiled, prune), children))
    else:
        decisions = [_evaluate(task, c, compiled, prune) for c in children]

    kept: List[PartialPlanNode] = []
    for child, decision in zip(children, decisions):
        if decision:
            child.violation = decision
            logger.debug(f"✂️ {decision.reason}: {decision.detail}")
            if log is not None:
                log.add(child, decision)
        else:
            kept.append(child)
    return kept


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def _unsolvable_at_root(e: Exception, stats: SearchStats, log: PruneLog) -> Unsolvable:
    if isinstance(e, InfeasibleLandmark):
        return Unsolvable(str(e), TLG_INCONSISTENT, stats, log, e.landmark, before_search=True)
    if isinstance(e, GoalUnreachable):
        return Unsolvable(str(e), "goal-unreachable", stats, log, str(e.prop), before_search=True)
    raise e


def solve(
    task: GroundedTask,
    max_nodes: Optional[int] = None,
    max_seconds: Optional[float] = None,
    jobs: int = 1,
    prune: bool = True,
    root: Optional[RootAnalysis] = None,
) -> SearchResult:
    """
    Best-first search on makespan.

    The root landmarks graph is built and propagated first; an inconsistent
    root means the task is unsolvable and no node is expanded.

    Raises:
        ResourceLimit: ``max_nodes`` expansions or ``max_seconds`` elapsed
    """
    stats = SearchStats()
    log = PruneLog()
    started = time.monotonic()

    tlg: Optional[TLG] = None
    compiled: List[CompiledConstraint] = []
    if prune:
        try:
            root = build_root_tlg(task) if root is None else root
        except (InfeasibleLandmark, GoalUnreachable) as e:
            stats.seconds = time.monotonic() - started
            return _unsolvable_at_root(e, stats, log)
        if not root.consistency:
            stats.seconds = time.monotonic() - started
            c = root.consistency
            return Unsolvable(c.witness, c.reason, stats, log, c.landmark, c.chain, before_search=True)
        tlg, compiled = root.tlg, root.compiled

    # warm the task's caches before worker threads share it
    _ = (task.static_props, task.achievers, task.consumers)
    waits = wait_points(task)
    watched = constraint_props(task)
    counter = itertools.count()
    start = root_node(task, tlg)
    frontier: List[Tuple[Tuple[Any, ...], int, PartialPlanNode]] = [(start.order_key(), next(counter), start)]
    seen = {start.key(watched)}
    best: Optional[PartialPlanNode] = None
    executor = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while frontier:
            elapsed = time.monotonic() - started
            if max_nodes is not None and stats.nodes_expanded >= max_nodes:
                raise ResourceLimit("max_nodes", _diagnostics(stats, best))
            if max_seconds is not None and elapsed > max_seconds:
                raise ResourceLimit("max_seconds", _diagnostics(stats, best))

            _, _, node = heapq.heappop(frontier)
            if is_goal(task, node):
                stats.seconds = time.monotonic() - started
                logger.info(
                    f"✅ plan with makespan {format_time(node.makespan)} after {stats.nodes_expanded} expansions"
                )
                return Solution(node.plan, node.trajectory, node.tlg, stats, log)

            stats.nodes_expanded += 1
            if best is None or len(node.plan) > len(best.plan):
                best = node
            children = expand(node, task, compiled, waits, prune, log, executor)
            stats.nodes_generated += len(children)
            for child in children:
                key = child.key(watched)
                if key in seen:
                    stats.duplicates += 1
                    continue
                seen.add(key)
                heapq.heappush(frontier, (child.order_key(), next(counter), child))
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
        stats.nodes_pruned = len(log)
        stats.seconds = time.monotonic() - started

    logger.info(f"❌ search space exhausted after {stats.nodes_expanded} expansions")
    return Unsolvable("search space exhausted", "exhausted", stats, log)


def _diagnostics(stats: SearchStats, best: Optional[PartialPlanNode]) -> str:
    text = f"{stats.nodes_expanded} nodes expanded, {stats.nodes_pruned} pruned"
    if best is not None:
        text += f"; deepest partial plan has {len(best.plan)} steps, makespan {format_time(best.makespan)}"
    return text


def enumerate_plans(
    task: GroundedTask,
    max_steps: int,
    horizon: Optional[Fraction] = None,
    earliest_only: bool = False,
) -> Iterator[TemporalPlan]:
    """
    Every plan of at most ``max_steps`` steps, with starts at candidate
    times, that reaches the goals and satisfies all constraints. No pruning
    beyond the horizon; meant for small tasks. ``earliest_only`` restricts
    starts the way the search does.
    """
    horizon = task.upper_bound if horizon is None else horizon
    waits = wait_points(task)
    root = root_node(task, None)
    root.horizon = horizon
    found: Set[Tuple[Any, ...]] = set()
    seen: Set[Tuple[Any, ...]] = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if is_goal(task, node) and node.plan.sort_key not in found:
            found.add(node.plan.sort_key)
            yield node.plan
        if len(node.plan) >= max_steps:
            continue
        for child in reversed(successors(task, node, waits, earliest_only)):
            if child.makespan > horizon or child.plan.sort_key in seen:
                continue
            seen.add(child.plan.sort_key)
            stack.append(child)
