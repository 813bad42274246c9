"""
Problem formalism: propositions, durative actions, grounded tasks, temporal
plans and the state trajectories a plan induces.

All times are exact ``Fraction`` values. Types are immutable once built.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .exceptions import ConditionViolation, GroundingError, MutexOverlap

logger = logging.getLogger(__name__)

Time = Fraction
INFINITY = math.inf
DEFAULT_EPSILON = Fraction(1, 1000)

TimeLike = Union[Fraction, int, str, float]


def to_time(value: TimeLike) -> Fraction:
    """Convert ``num``, ``num/den`` or decimal text (or a number) to an exact time"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # floats only arrive from YAML; go through their shortest repr
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a rational time value: {value!r}") from e


def format_time(value: Union[Fraction, float], decimal: bool = False) -> str:
    """Exact ``num/den`` rendering (integers print bare); ``decimal`` is lossy"""
    if value == INFINITY:
        return "inf"
    if decimal:
        return f"{float(value):g}"
    return str(Fraction(value))


@dataclass(frozen=True, order=True)
class Proposition:
    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.predicate})"
        return f"({self.predicate} {' '.join(self.args)})"

    @classmethod
    def parse(cls, text: str) -> "Proposition":
        """Build a proposition from ``(pred a b)`` text"""
        tokens = text.strip().strip("()").split()
        if not tokens:
            raise ValueError(f"empty proposition: {text!r}")
        return cls(tokens[0].lower(), tuple(tokens[1:]))


PropSet = FrozenSet[Proposition]


@dataclass(frozen=True, eq=False)
class DurativeAction:
    """A ground durative action; identity is its name plus arguments"""

    name: str
    params: Tuple[str, ...]
    dur: Fraction
    s_cond: PropSet = frozenset()
    e_cond: PropSet = frozenset()
    inv: PropSet = frozenset()
    s_add: PropSet = frozenset()
    s_del: PropSet = frozenset()
    e_add: PropSet = frozenset()
    e_del: PropSet = frozenset()

    def __post_init__(self):
        if self.dur <= 0:
            raise GroundingError(f"action {self.label} has non-positive duration {self.dur}")
        if self.s_add & self.s_del:
            raise GroundingError(f"action {self.label} adds and deletes at start: {sorted(map(str, self.s_add & self.s_del))}")
        if self.e_add & self.e_del:
            raise GroundingError(f"action {self.label} adds and deletes at end: {sorted(map(str, self.e_add & self.e_del))}")

    @property
    def key(self) -> Tuple[str, Tuple[str, ...]]:
        return (self.name, self.params)

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, DurativeAction) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __lt__(self, other: "DurativeAction") -> bool:
        return self.key < other.key

    @property
    def label(self) -> str:
        return f"({' '.join((self.name,) + self.params)})"

    def __str__(self) -> str:
        return self.label

    @cached_property
    def conditions(self) -> PropSet:
        return self.s_cond | self.inv | self.e_cond

    @cached_property
    def adds(self) -> PropSet:
        return self.s_add | self.e_add

    @cached_property
    def deletes(self) -> PropSet:
        return self.s_del | self.e_del


@dataclass(frozen=True, order=True)
class TimedLiteral:
    """A timed initial literal: ``prop`` becomes true (or false) at ``time``"""

    time: Fraction
    prop: Proposition
    positive: bool = True


@dataclass(frozen=True)
class GroundedTask:
    """The ground planning task with its deadlines and trajectory constraints"""

    props: PropSet
    actions: Tuple[DurativeAction, ...]
    init: PropSet
    goals: PropSet
    tils: Tuple[TimedLiteral, ...] = ()
    deadlines: Tuple[Tuple[Proposition, Fraction], ...] = ()
    constraints: Tuple[Any, ...] = ()
    upper_bound: Fraction = Fraction(0)
    epsilon: Fraction = DEFAULT_EPSILON
    name: str = "task"

    def __post_init__(self):
        missing = (self.init | self.goals | {p for p, _ in self.deadlines}) - self.props
        if missing:
            raise GroundingError(f"propositions outside P: {sorted(map(str, missing))}")

    @cached_property
    def achievers(self) -> Dict[Proposition, Tuple[DurativeAction, ...]]:
        table: Dict[Proposition, List[DurativeAction]] = defaultdict(list)
        for action in self.actions:
            for p in action.adds:
                table[p].append(action)
        return {p: tuple(acts) for p, acts in table.items()}

    @cached_property
    def consumers(self) -> Dict[Proposition, Tuple[DurativeAction, ...]]:
        table: Dict[Proposition, List[DurativeAction]] = defaultdict(list)
        for action in self.actions:
            for p in action.conditions:
                table[p].append(action)
        return {p: tuple(acts) for p, acts in table.items()}

    @cached_property
    def static_props(self) -> PropSet:
        """Initial facts no action or TIL ever changes"""
        touched = set()
        for action in self.actions:
            touched |= action.adds | action.deletes
        touched |= {til.prop for til in self.tils}
        return frozenset(p for p in self.init if p not in touched)

    @cached_property
    def deadline_map(self) -> Dict[Proposition, Fraction]:
        table: Dict[Proposition, Fraction] = {}
        for prop, t in self.deadlines:
            table[prop] = min(t, table.get(prop, t))
        return table

    @cached_property
    def action_index(self) -> Dict[str, DurativeAction]:
        return {action.label.lower(): action for action in self.actions}

    def find_action(self, label: str) -> Optional[DurativeAction]:
        tokens = label.strip().strip("()").lower().split()
        return self.action_index.get(f"({' '.join(tokens)})")

    @cached_property
    def _hash(self) -> int:
        return hash((self.name, self.props, self.actions, self.init, self.goals, self.tils,
                     self.deadlines, self.constraints, self.upper_bound, self.epsilon))

    def __hash__(self) -> int:
        # computed once: tasks key the relaxation caches
        return self._hash


@dataclass(frozen=True, order=True)
class PlanStep:
    start: Fraction
    action: DurativeAction = field(compare=False)
    sort_name: Tuple[str, Tuple[str, ...]] = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sort_name", self.action.key)

    @property
    def end(self) -> Fraction:
        return self.start + self.action.dur

    def __str__(self) -> str:
        return f"{format_time(self.start)}: {self.action.label} [{format_time(self.action.dur)}]"


@dataclass(frozen=True)
class TemporalPlan:
    """Timestamped steps sorted by start time, then action name and args"""

    steps: Tuple[PlanStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(sorted(self.steps)))

    @classmethod
    def of(cls, pairs: Iterable[Tuple[DurativeAction, TimeLike]]) -> "TemporalPlan":
        return cls(tuple(PlanStep(to_time(t), a) for a, t in pairs))

    @property
    def makespan(self) -> Fraction:
        return max((s.end for s in self.steps), default=Fraction(0))

    def extend(self, action: DurativeAction, start: Fraction) -> "TemporalPlan":
        return TemporalPlan(self.steps + (PlanStep(start, action),))

    @property
    def sort_key(self) -> Tuple[Any, ...]:
        return tuple((s.start, s.sort_name) for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def to_ipc(self, decimal: bool = False) -> str:
        lines = [
            f"{format_time(s.start, decimal)}: {s.action.label} [{format_time(s.action.dur, decimal)}]"
            for s in self.steps
        ]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class Happening:
    time: Fraction
    state: PropSet


@dataclass(frozen=True)
class StateTrajectory:
    """``<(S_0, 0), (S_1, t_1), ..., (S_n, t_n)>``; times strictly increasing"""

    happenings: Tuple[Happening, ...]

    @property
    def states(self) -> List[PropSet]:
        return [h.state for h in self.happenings]

    @property
    def times(self) -> List[Fraction]:
        return [h.time for h in self.happenings]

    @property
    def final(self) -> Happening:
        return self.happenings[-1]

    def __len__(self) -> int:
        return len(self.happenings)

    def holds(self, i: int, props: Iterable[Proposition]) -> bool:
        state = self.happenings[i].state
        return all(p in state for p in props)

    def blocks(self, props: Iterable[Proposition]) -> List[Tuple[int, int]]:
        """Maximal runs of consecutive happenings where all ``props`` hold"""
        props = tuple(props)
        runs: List[Tuple[int, int]] = []
        start: Optional[int] = None
        for i in range(len(self.happenings)):
            if self.holds(i, props):
                if start is None:
                    start = i
            elif start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(self.happenings) - 1))
        return runs

    def state_at(self, t: Fraction) -> PropSet:
        """State current at time ``t`` (last happening not after ``t``)"""
        current = self.happenings[0].state
        for h in self.happenings:
            if h.time > t:
                break
            current = h.state
        return current


@dataclass
class _Event:
    kind: str  # start | end | til
    label: str
    owner: Any
    conds: PropSet
    adds: PropSet
    dels: PropSet


def _collect_events(task: GroundedTask, plan: TemporalPlan) -> Dict[Fraction, List[_Event]]:
    events: Dict[Fraction, List[_Event]] = defaultdict(list)
    for til in task.tils:
        adds = frozenset([til.prop]) if til.positive else frozenset()
        dels = frozenset() if til.positive else frozenset([til.prop])
        events[til.time].append(_Event("til", str(til.prop), til, frozenset(), adds, dels))
    for step in plan.steps:
        a = step.action
        events[step.start].append(_Event("start", a.label, step, a.s_cond, a.s_add, a.s_del))
        events[step.end].append(_Event("end", a.label, step, a.e_cond, a.e_add, a.e_del))
    return events


def _apply_happening(time: Fraction, pre: PropSet, batch: Sequence[_Event]) -> PropSet:
    deleters: Dict[Proposition, List[int]] = defaultdict(list)
    adds: set = set()
    for idx, ev in enumerate(batch):
        for p in ev.dels:
            deleters[p].append(idx)
        adds |= ev.adds
    for idx, ev in enumerate(batch):
        for p in sorted(ev.conds):
            if p not in pre:
                raise ConditionViolation(ev.label, time, p)
            if any(other != idx for other in deleters.get(p, ())):
                raise MutexOverlap(time, p)
    clash = sorted(adds & deleters.keys())
    if clash:
        raise MutexOverlap(time, clash[0])
    return frozenset((pre - deleters.keys()) | adds)


def reconstruct_trajectory(task: GroundedTask, plan: TemporalPlan) -> StateTrajectory:
    """
    Replay ``plan`` from the initial state and return its happening sequence.

    At each happening the start and end conditions are checked against the
    state before the happening; deletes are applied before adds. Invariants
    must hold in every state from the action's start happening up to (not
    including) its end happening.

    Raises:
        ConditionViolation: a condition or invariant fails
        MutexOverlap: simultaneous interfering effects
    """
    events = _collect_events(task, plan)
    times = sorted(set(events) | {Fraction(0)})
    state: PropSet = task.init
    happenings: List[Happening] = []
    for t in times:
        batch = events.get(t, [])
        if t < 0:
            raise ConditionViolation(batch[0].label if batch else "til", t, "negative time")
        state = _apply_happening(t, state, batch)
        happenings.append(Happening(t, state))

    for step in plan.steps:
        if not step.action.inv:
            continue
        for h in happenings:
            if step.start <= h.time < step.end:
                missing = step.action.inv - h.state
                if missing:
                    raise ConditionViolation(step.action.label, h.time, min(missing))
    return StateTrajectory(tuple(happenings))


def replay_deltas(task: GroundedTask, trajectory: StateTrajectory) -> List[PropSet]:
    """Rebuild each S_i from S_0 by applying consecutive add/delete deltas"""
    states = [trajectory.happenings[0].state]
    for prev, cur in zip(trajectory.happenings, trajectory.happenings[1:]):
        added = cur.state - prev.state
        removed = prev.state - cur.state
        states.append(frozenset((states[-1] - removed) | added))
    return states
