"""
Temporal relaxed planning graph.

Delete-relaxed, time-stamped reachability: every proposition gets the
earliest time it can appear. An action is applicable once all its start,
invariant and end conditions are available; its start effects appear at the
start time and its end effects ``dur`` later.
"""
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from .core_model import INFINITY, DurativeAction, GroundedTask, Proposition

logger = logging.getLogger(__name__)

START, END, INIT, TIL = "start", "end", "init", "til"


@dataclass(frozen=True)
class TemporalRPG:
    """Earliest appearance times of propositions and earliest action starts"""

    earliest: Dict[Proposition, Fraction] = field(default_factory=dict)
    action_start: Dict[DurativeAction, Fraction] = field(default_factory=dict)
    # first support of each proposition: (action or None, START/END/INIT/TIL)
    support: Dict[Proposition, Tuple[Optional[DurativeAction], str]] = field(default_factory=dict)
    now: Fraction = Fraction(0)

    @cached_property
    def reached(self) -> FrozenSet[Proposition]:
        return frozenset(self.earliest)

    def applicable(self, action: DurativeAction) -> bool:
        return action in self.action_start

    def __contains__(self, p: Proposition) -> bool:
        return p in self.earliest


def build_trpg(
    task: GroundedTask,
    exclude: Iterable[Proposition] = (),
    state: Optional[Iterable[Proposition]] = None,
    now: Fraction = Fraction(0),
    pending: Iterable[Tuple[Fraction, Proposition]] = (),
    use_tils: bool = True,
    horizon: Optional[Fraction] = None,
) -> TemporalRPG:
    """
    Propagate earliest times to a fixpoint.

    Args:
        exclude: propositions removed from the start state; their achievers
            are removed too, so they never appear
        state: start state (default: the initial state) holding at ``now``
        pending: effects already scheduled, as ``(time, prop)``
        use_tils: let positive timed literals at or after ``now`` appear
        horizon: drop events strictly later than this time
    """
    excluded = frozenset(exclude)
    start_state = task.init if state is None else frozenset(state)

    earliest: Dict[Proposition, Fraction] = {}
    action_start: Dict[DurativeAction, Fraction] = {}
    support: Dict[Proposition, Tuple[Optional[DurativeAction], str]] = {}
    best: Dict[Proposition, Fraction] = {}
    heap: List[Tuple[Fraction, int, Proposition]] = []
    counter = itertools.count()

    def push(t: Fraction, p: Proposition, origin: Tuple[Optional[DurativeAction], str]):
        if p in excluded or (horizon is not None and t > horizon):
            return
        if p not in best or t < best[p]:
            best[p] = t
            support[p] = origin
            heapq.heappush(heap, (t, next(counter), p))

    for p in sorted(start_state):
        push(now, p, (None, INIT))
    for t, p in pending:
        push(max(t, now), p, (None, INIT))
    if use_tils:
        for til in task.tils:
            if til.positive and til.time >= now:
                push(til.time, til.prop, (None, TIL))

    actions = [a for a in task.actions if not (a.adds & excluded)]
    missing: Dict[DurativeAction, int] = {a: len(a.conditions) for a in actions}
    waiting: Dict[Proposition, List[DurativeAction]] = {}
    for a in actions:
        for p in a.conditions:
            waiting.setdefault(p, []).append(a)

    def fire(a: DurativeAction, t: Fraction):
        action_start[a] = t
        for q in sorted(a.s_add):
            push(t, q, (a, START))
        for q in sorted(a.e_add):
            push(t + a.dur, q, (a, END))

    for a in actions:
        if missing[a] == 0:
            fire(a, now)

    while heap:
        t, _, p = heapq.heappop(heap)
        if p in earliest or best[p] != t:
            continue
        earliest[p] = t
        for a in waiting.get(p, ()):
            missing[a] -= 1
            if missing[a] == 0:
                # p is the last condition to appear, so t is the max
                fire(a, t)

    logger.debug(f"TRPG: {len(earliest)} propositions, {len(action_start)} actions reachable")
    return TemporalRPG(earliest=earliest, action_start=action_start, support=support, now=now)


def earliest_time(trpg: TemporalRPG, p: Proposition) -> Union[Fraction, float]:
    """Earliest relaxed appearance of ``p``; ``INFINITY`` when unreachable"""
    return trpg.earliest.get(p, INFINITY)


def achievers_in(task: GroundedTask, trpg: TemporalRPG, p: Proposition) -> List[DurativeAction]:
    """Achievers of ``p`` that are applicable in ``trpg``"""
    return [a for a in task.achievers.get(p, ()) if trpg.applicable(a)]


@lru_cache(maxsize=16)
def initial_trpg(task: GroundedTask) -> TemporalRPG:
    """The TRPG from the initial state, shared between callers; do not mutate"""
    return build_trpg(task)


@lru_cache(maxsize=8192)
def trpg_without(task: GroundedTask, p: Proposition) -> TemporalRPG:
    """The TRPG with ``p`` and its achievers removed, shared between callers"""
    return build_trpg(task, exclude=[p])
