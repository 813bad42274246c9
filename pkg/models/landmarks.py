"""
Causal landmarks, their orderings, and the temporal landmarks that trajectory
constraints and deadlines add on top of them.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx

from .core_model import DurativeAction, GroundedTask, Proposition, format_time
from .exceptions import GoalUnreachable, InfeasibleLandmark
from .trpg import TemporalRPG, achievers_in, initial_trpg, trpg_without

logger = logging.getLogger(__name__)


class OrderingKind(str, Enum):
    NECESSARY = "necessary"
    DEPENDENCY = "dependency"

    @property
    def symbol(self) -> str:
        return "n" if self is OrderingKind.NECESSARY else "d"


@dataclass(frozen=True, order=True)
class Ordering:
    before: Proposition
    after: Proposition
    kind: OrderingKind

    def __str__(self) -> str:
        return f"{self.before} <_{self.kind.symbol} {self.after}"


@dataclass(frozen=True)
class LandmarkSet:
    """Landmark propositions plus ordering edges between them"""

    landmarks: FrozenSet[Proposition]
    orderings: FrozenSet[Ordering] = frozenset()
    # (before, after) -> actions that make a necessary ordering necessary
    witnesses: Dict[Tuple[Proposition, Proposition], Tuple[DurativeAction, ...]] = field(
        default_factory=dict, compare=False, hash=False
    )
    # proposition -> why it is a landmark
    provenance: Dict[Proposition, str] = field(default_factory=dict, compare=False, hash=False)

    def __contains__(self, p: Proposition) -> bool:
        return p in self.landmarks

    def __len__(self) -> int:
        return len(self.landmarks)

    def ordering(self, before: Proposition, after: Proposition) -> Optional[Ordering]:
        for o in self.orderings:
            if o.before == before and o.after == after:
                return o
        return None

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(sorted(self.landmarks))
        for o in sorted(self.orderings):
            g.add_edge(o.before, o.after, kind=o.kind)
        return g


class _Relaxation:
    """TRPGs of the task with single propositions excluded"""

    def __init__(self, task: GroundedTask):
        self.task = task
        self.full = initial_trpg(task)

    def without(self, p: Proposition) -> TemporalRPG:
        return trpg_without(self.task, p)

    def first_achievers(self, p: Proposition) -> List[DurativeAction]:
        """Achievers of ``p`` applicable before ``p`` first appears"""
        reached = self.without(p).reached
        return [a for a in achievers_in(self.task, self.full, p) if a.conditions <= reached]


def _orderings(
    task: GroundedTask, relax: _Relaxation, landmarks: Set[Proposition]
) -> Tuple[Set[Ordering], Dict[Tuple[Proposition, Proposition], Tuple[DurativeAction, ...]]]:
    static = task.static_props
    g = nx.DiGraph()
    for li in sorted(landmarks):
        if li in static:
            continue
        unreachable = landmarks - relax.without(li).reached
        for lj in sorted(unreachable):
            if lj != li and lj not in task.init and lj not in static:
                g.add_edge(li, lj)
    while not nx.is_directed_acyclic_graph(g):
        g.remove_edges_from(nx.find_cycle(g))
    reduced = nx.transitive_reduction(g)

    orderings: Set[Ordering] = set()
    witnesses: Dict[Tuple[Proposition, Proposition], Tuple[DurativeAction, ...]] = {}
    for li, lj in sorted(reduced.edges()):
        first = relax.first_achievers(lj)
        if first and all(li in a.conditions for a in first):
            orderings.add(Ordering(li, lj, OrderingKind.NECESSARY))
            witnesses[(li, lj)] = tuple(first)
        else:
            orderings.add(Ordering(li, lj, OrderingKind.DEPENDENCY))
    return orderings, witnesses


def extract_causal_landmarks(task: GroundedTask, targets: Optional[Iterable[Proposition]] = None) -> LandmarkSet:
    """
    Propositions every delete-relaxed plan must achieve.

    ``p`` is a landmark when some target becomes relaxed-unreachable once
    ``p`` and its achievers are removed. Targets default to the goals; the
    initial state and the targets are landmarks by definition.

    Raises:
        GoalUnreachable: a target is unreachable even without exclusions
    """
    relax = _Relaxation(task)
    goals = frozenset(task.goals if targets is None else targets)
    for g in sorted(goals):
        if g not in relax.full:
            raise GoalUnreachable(g)

    provenance: Dict[Proposition, str] = {p: "init" for p in task.init}
    provenance.update({g: "goal" for g in goals})
    landmarks: Set[Proposition] = set(task.init) | set(goals)
    for p in sorted(relax.full.reached - landmarks - task.static_props):
        if not goals <= relax.without(p).reached:
            landmarks.add(p)
            provenance[p] = "causal"

    orderings, witnesses = _orderings(task, relax, landmarks)
    logger.info(f"🧭 {len(landmarks)} causal landmarks, {len(orderings)} orderings")
    return LandmarkSet(frozenset(landmarks), frozenset(orderings), witnesses, provenance)


def _with_constraint_landmarks(task: GroundedTask, lms: LandmarkSet) -> LandmarkSet:
    """Add what the trajectory constraints make mandatory, with its causal support"""
    from .trajectory import landmarks_created

    created: Dict[Proposition, str] = {}
    current = lms
    while True:
        added = {
            p: f"constraint {c}"
            for c in task.constraints
            for p in landmarks_created(c, current.__contains__)
            if p not in current and p not in created
        }
        if not added:
            return current
        created.update(added)
        targets = set(task.goals) | set(created)
        extended = extract_causal_landmarks(task, targets)
        provenance = dict(lms.provenance)
        provenance.update({p: why for p, why in extended.provenance.items() if p not in provenance})
        provenance.update(created)
        current = LandmarkSet(
            extended.landmarks | lms.landmarks,
            extended.orderings | lms.orderings,
            {**lms.witnesses, **extended.witnesses},
            provenance,
        )


def _acyclic_add(g: nx.DiGraph, before: Proposition, after: Proposition) -> bool:
    if before == after or (after in g and before in g and nx.has_path(g, after, before)):
        return False
    g.add_edge(before, after)
    return True


def _at_end_orderings(task: GroundedTask, lms: LandmarkSet, mutexes) -> Set[Ordering]:
    """Landmarks mutex with one that must hold at the end come before it"""
    from .trajectory import Modality

    final = set(task.goals)
    final |= {p for c in task.constraints if c.op is Modality.AT_END for p in c.phi}
    g = lms.graph()
    added: Set[Ordering] = set()
    for lm in sorted(final & lms.landmarks):
        for m in sorted(lms.landmarks):
            if frozenset((m, lm)) in mutexes and not g.has_edge(m, lm) and _acyclic_add(g, m, lm):
                added.add(Ordering(m, lm, OrderingKind.DEPENDENCY))
    return added


def _reduce(orderings: Set[Ordering]) -> Set[Ordering]:
    """Drop dependency orderings implied by longer chains"""
    g = nx.DiGraph()
    g.add_edges_from((o.before, o.after) for o in orderings)
    if not nx.is_directed_acyclic_graph(g):
        return orderings
    reduced = nx.transitive_reduction(g)
    return {o for o in orderings if o.kind is OrderingKind.NECESSARY or reduced.has_edge(o.before, o.after)}


def _force_routes(task: GroundedTask, lms: LandmarkSet, mutexes) -> LandmarkSet:
    """
    Disjunctive achiever pruning. Once the latest generation times are
    known, first achievers that cannot produce a landmark in time are
    discarded; conditions shared by every surviving achiever become
    landmarks ordered necessarily before it.
    """
    from .tlg import build_tlg, propagate

    relax = _Relaxation(task)
    landmarks = set(lms.landmarks)
    orderings = set(lms.orderings)
    witnesses = dict(lms.witnesses)
    provenance = dict(lms.provenance)
    static = task.static_props

    for _ in range(len(task.props) + 1):
        current = LandmarkSet(frozenset(landmarks), frozenset(orderings), witnesses, provenance)
        try:
            tlg, _ = build_tlg(task, current, relax.full, mutexes)
        except InfeasibleLandmark:
            break  # reported again, with its witness, when the root graph is built
        propagate(tlg)
        g = current.graph()
        changed = False
        for lj in sorted(landmarks - set(task.init)):
            max_g = tlg.landmark(lj).max_g
            first = relax.first_achievers(lj)
            feasible = [
                a
                for a in first
                if a in relax.full.action_start
                and relax.full.action_start[a] + (0 if lj in a.s_add else a.dur) <= max_g
            ]
            if not feasible or len(feasible) == len(first):
                continue
            shared = frozenset.intersection(*(a.conditions for a in feasible)) - static
            for li in sorted(shared):
                old = current.ordering(li, lj)
                if old is not None and old.kind is OrderingKind.NECESSARY:
                    continue
                if old is None and not _acyclic_add(g, li, lj):
                    continue
                if li not in landmarks:
                    landmarks.add(li)
                    provenance[li] = f"only route to {lj} by {format_time(max_g)}"
                    logger.info(f"🧭 {li} forced by the deadline of {lj}")
                orderings.discard(Ordering(li, lj, OrderingKind.DEPENDENCY))
                orderings.add(Ordering(li, lj, OrderingKind.NECESSARY))
                witnesses[(li, lj)] = tuple(feasible)
                changed = True
        if not changed:
            break
    return LandmarkSet(frozenset(landmarks), frozenset(_reduce(orderings)), witnesses, provenance)


def derive_temporal_landmarks(
    task: GroundedTask,
    lms: LandmarkSet,
    mutexes: Optional[AbstractSet[FrozenSet[Proposition]]] = None,
) -> LandmarkSet:
    """
    Extend causal landmarks with those the trajectory constraints and
    deadlines impose.

    Constraint operators add their goal descriptors (two-argument ones only
    once the first argument is a landmark) and the causal support of what
    they add. Landmarks mutex with an end-of-plan landmark are ordered
    before it. Deadlines that leave a single route to a landmark promote
    the route's conditions to landmarks with necessary orderings.
    """
    if mutexes is None:
        from .tlg import compute_mutex

        mutexes = compute_mutex(task)
    extended = _with_constraint_landmarks(task, lms)
    extended = LandmarkSet(
        extended.landmarks,
        extended.orderings | _at_end_orderings(task, extended, mutexes),
        extended.witnesses,
        extended.provenance,
    )
    result = _force_routes(task, extended, mutexes)
    logger.info(
        f"🧭 {len(result)} temporal landmarks ({len(result) - len(lms)} from constraints and deadlines), "
        f"{len(result.orderings)} orderings"
    )
    return result
