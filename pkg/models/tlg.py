"""
Temporal Landmarks Graph.

Every landmark carries three intervals: generation ``[min_g, max_g]`` (when
it is first achieved), validity ``[min_v, max_v]`` (when it may hold) and
necessity ``[min_n, max_n]`` (when it must hold). Ordering edges carry a
minimal temporal distance. Propagation shrinks the intervals to a fixpoint
and the consistency check turns empty intervals into a witness.
"""
import logging
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, TypeVar, Union

import networkx as nx

from .core_model import DEFAULT_EPSILON, INFINITY, DurativeAction, GroundedTask, Proposition, format_time, to_time
from .exceptions import AtMostOnceViolation, InfeasibleLandmark, NoCausalWitness, NoConflict
from .landmarks import LandmarkSet, OrderingKind
from .trajectory import CompiledConstraint, EndpointConstraint, Modality
from .trajectory import compile as compile_constraint
from .trpg import TemporalRPG, build_trpg, earliest_time, trpg_without

logger = logging.getLogger(__name__)

NodeKey = Tuple[Proposition, int]
TimeValue = Union[Fraction, float]
T = TypeVar("T")

SUPPORT = "support"
# necessity sources that a later occurrence of the proposition may satisfy
SPLITTABLE = frozenset({Modality.AT_END.value, Modality.HOLD_AFTER.value, Modality.HOLD_DURING.value, SUPPORT})


@dataclass
class TemporalLandmark:
    prop: Proposition
    occurrence: int = 0
    min_g: TimeValue = Fraction(0)
    max_g: TimeValue = INFINITY
    min_v: TimeValue = Fraction(0)
    max_v: TimeValue = INFINITY
    min_n: TimeValue = Fraction(0)
    max_n: TimeValue = INFINITY
    # the landmark must stay valid until this time (from at-end, always, ...)
    required_until: Optional[Fraction] = None
    required_by: Optional[str] = None
    achieved_at: Optional[Fraction] = None
    # the plan deleted the occurrence at this time
    closed_at: Optional[Fraction] = None
    # endpoint -> (reason, landmark key the bound came from)
    provenance: Dict[str, Tuple[str, Optional[NodeKey]]] = field(default_factory=dict)

    @property
    def key(self) -> NodeKey:
        return (self.prop, self.occurrence)

    @property
    def label(self) -> str:
        return str(self.prop) + "'" * self.occurrence

    @property
    def gen(self) -> Tuple[TimeValue, TimeValue]:
        return (self.min_g, self.max_g)

    @property
    def val(self) -> Tuple[TimeValue, TimeValue]:
        return (self.min_v, self.max_v)

    @property
    def nec(self) -> Tuple[TimeValue, TimeValue]:
        return (self.min_n, self.max_n)

    def intervals(self) -> Tuple[TimeValue, ...]:
        return (self.min_g, self.max_g, self.min_v, self.max_v, self.min_n, self.max_n)

    def __str__(self) -> str:
        def iv(lo, hi):
            return f"[{format_time(lo)},{format_time(hi)}]"

        return f"{self.label} g{iv(*self.gen)} v{iv(*self.val)} n{iv(*self.nec)}"


class TLG:
    """Landmark nodes with interval annotations over a networkx DiGraph"""

    def __init__(
        self,
        horizon: Fraction,
        epsilon: Fraction = DEFAULT_EPSILON,
        task: Optional[GroundedTask] = None,
    ):
        self.graph = nx.DiGraph()
        self.horizon = horizon
        self.epsilon = epsilon
        self.task = task
        self.mutexes: FrozenSet[FrozenSet[Proposition]] = frozenset()
        self.relations: List[EndpointConstraint] = []
        self.deadlines: Dict[Proposition, Fraction] = {}
        self.at_most_once: Set[Proposition] = set()
        self.earliest: Dict[Proposition, Fraction] = {}

    # -- nodes -------------------------------------------------------------

    def __len__(self) -> int:
        return self.graph.number_of_nodes()

    def __contains__(self, key: NodeKey) -> bool:
        return key in self.graph

    def has_landmark(self, prop: Proposition) -> bool:
        return (prop, 0) in self.graph

    def landmark(self, key: Union[NodeKey, Proposition]) -> TemporalLandmark:
        if isinstance(key, Proposition):
            key = (key, 0)
        return self.graph.nodes[key]["lm"]

    def landmarks(self) -> List[TemporalLandmark]:
        return [self.graph.nodes[k]["lm"] for k in sorted(self.graph.nodes)]

    def occurrences(self, prop: Proposition) -> List[TemporalLandmark]:
        keys = sorted(k for k in self.graph.nodes if k[0] == prop)
        return [self.graph.nodes[k]["lm"] for k in keys]

    def _init_bounds(self, lm: TemporalLandmark):
        """Intervals from the earliest times, horizon and deadlines, then what the plan fixed"""
        min_g = self.earliest.get(lm.prop, INFINITY)
        max_g: TimeValue = self.horizon
        if lm.occurrence == 0 and lm.prop in self.deadlines:
            max_g = min(max_g, self.deadlines[lm.prop])
        lm.min_g = lm.min_v = lm.min_n = min_g
        lm.max_g = max_g
        lm.max_v = lm.max_n = self.horizon
        lm.provenance = {
            "min_g": ("earliest relaxed time", None),
            "max_g": ("deadline" if max_g != self.horizon else "horizon", None),
        }
        if lm.achieved_at is not None:
            lm.min_g = lm.min_v = lm.min_n = lm.achieved_at
            lm.max_g = min(lm.max_g, lm.achieved_at)
            lm.provenance["min_g"] = ("achieved by the plan", None)
            lm.provenance["max_g"] = ("achieved by the plan", None)
        if lm.closed_at is not None:
            lm.max_v = lm.max_n = min(lm.max_v, lm.closed_at)
            lm.provenance["max_v"] = ("deleted by the plan", None)

    def reset_bounds(self):
        """Drop propagated bounds; edges, relations and achievements stay"""
        for lm in self.landmarks():
            self._init_bounds(lm)

    def add_landmark(self, prop: Proposition, occurrence: Optional[int] = None) -> TemporalLandmark:
        """Add a landmark (or a further occurrence) with intervals from the TRPG and horizon"""
        if occurrence is None:
            occurrence = len(self.occurrences(prop))
        if (prop, occurrence) in self.graph:
            return self.landmark((prop, occurrence))
        lm = TemporalLandmark(prop, occurrence)
        self._init_bounds(lm)
        self.graph.add_node(lm.key, lm=lm)
        return lm

    # -- edges -------------------------------------------------------------

    def add_edge(
        self,
        li: NodeKey,
        lj: NodeKey,
        kind: OrderingKind,
        dist: Fraction,
        witnesses: Iterable[str] = (),
        need: Optional[Fraction] = None,
    ):
        """``need``: how long before ``lj`` appears ``li`` must still hold (necessary edges)"""
        self.graph.add_edge(li, lj, kind=kind, dist=Fraction(dist), witnesses=tuple(witnesses), need=need)

    def edges(self) -> List[Tuple[NodeKey, NodeKey, Dict[str, Any]]]:
        return sorted(self.graph.edges(data=True), key=lambda e: (e[0], e[1]))

    def edge(self, li: NodeKey, lj: NodeKey) -> Optional[Dict[str, Any]]:
        return self.graph.edges[li, lj] if self.graph.has_edge(li, lj) else None

    def ordered(self, li: NodeKey, lj: NodeKey) -> bool:
        return nx.has_path(self.graph, li, lj)

    # -- mutexes -----------------------------------------------------------

    def is_mutex(self, p: Proposition, q: Proposition) -> bool:
        return p != q and frozenset((p, q)) in self.mutexes

    def mutex_pairs(self) -> List[Tuple[NodeKey, NodeKey]]:
        """Unordered pairs of landmark nodes whose propositions are mutex"""
        keys = sorted(self.graph.nodes)
        return [
            (a, b)
            for i, a in enumerate(keys)
            for b in keys[i + 1:]
            if self.is_mutex(a[0], b[0])
        ]

    # -- copies and serialisation ------------------------------------------

    def copy(self) -> "TLG":
        """Independent landmarks and edges; task, mutexes and relations are shared"""
        other = TLG(self.horizon, self.epsilon, self.task)
        for key, data in self.graph.nodes(data=True):
            lm = data["lm"]
            other.graph.add_node(key, lm=replace(lm, provenance=dict(lm.provenance)))
        other.graph.add_edges_from((a, b, dict(data)) for a, b, data in self.graph.edges(data=True))
        other.mutexes = self.mutexes
        other.relations = list(self.relations)
        other.deadlines = dict(self.deadlines)
        other.at_most_once = set(self.at_most_once)
        other.earliest = dict(self.earliest)
        return other

    def to_dict(self) -> Dict[str, Any]:
        def t(value):
            return None if value is None else format_time(value)

        nodes = []
        for lm in self.landmarks():
            nodes.append(
                {
                    "prop": str(lm.prop),
                    "occurrence": lm.occurrence,
                    "gen": [t(lm.min_g), t(lm.max_g)],
                    "val": [t(lm.min_v), t(lm.max_v)],
                    "nec": [t(lm.min_n), t(lm.max_n)],
                    "required_until": t(lm.required_until),
                    "required_by": lm.required_by,
                    "achieved_at": t(lm.achieved_at),
                    "closed_at": t(lm.closed_at),
                }
            )
        edges = [
            {
                "from": [str(a[0]), a[1]],
                "to": [str(b[0]), b[1]],
                "kind": data["kind"].value,
                "dist": t(data["dist"]),
                "witnesses": list(data["witnesses"]),
                "need": t(data.get("need")),
            }
            for a, b, data in self.edges()
        ]
        return {
            "horizon": t(self.horizon),
            "epsilon": t(self.epsilon),
            "nodes": nodes,
            "edges": edges,
            "mutexes": sorted(sorted(str(p) for p in pair) for pair in self.mutexes),
            "deadlines": {str(p): t(d) for p, d in sorted(self.deadlines.items())},
            "at_most_once": sorted(str(p) for p in self.at_most_once),
            "earliest": {str(p): t(v) for p, v in sorted(self.earliest.items())},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TLG":
        def t(value):
            if value is None:
                return None
            return INFINITY if value == "inf" else to_time(value)

        tlg = cls(t(data["horizon"]), t(data.get("epsilon", str(DEFAULT_EPSILON))))
        for n in data["nodes"]:
            lm = TemporalLandmark(Proposition.parse(n["prop"]), n["occurrence"])
            lm.min_g, lm.max_g = (t(x) for x in n["gen"])
            lm.min_v, lm.max_v = (t(x) for x in n["val"])
            lm.min_n, lm.max_n = (t(x) for x in n["nec"])
            lm.required_until = t(n.get("required_until"))
            lm.required_by = n.get("required_by")
            lm.achieved_at = t(n.get("achieved_at"))
            lm.closed_at = t(n.get("closed_at"))
            tlg.graph.add_node(lm.key, lm=lm)
        for e in data["edges"]:
            li = (Proposition.parse(e["from"][0]), e["from"][1])
            lj = (Proposition.parse(e["to"][0]), e["to"][1])
            tlg.add_edge(li, lj, OrderingKind(e["kind"]), t(e["dist"]), e.get("witnesses", ()), t(e.get("need")))
        tlg.mutexes = frozenset(frozenset(Proposition.parse(p) for p in pair) for pair in data.get("mutexes", []))
        tlg.deadlines = {Proposition.parse(p): t(d) for p, d in data.get("deadlines", {}).items()}
        tlg.at_most_once = {Proposition.parse(p) for p in data.get("at_most_once", [])}
        tlg.earliest = {Proposition.parse(p): t(v) for p, v in data.get("earliest", {}).items()}
        return tlg


# ---------------------------------------------------------------------------
# Mutexes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Snap:
    name: str
    pre: FrozenSet[Proposition]
    add: FrozenSet[Proposition]
    dele: FrozenSet[Proposition]


def _running(action: DurativeAction) -> Proposition:
    return Proposition("~running", (action.label,))


def _snap_actions(task: GroundedTask) -> List[_Snap]:
    snaps: List[_Snap] = []
    for a in task.actions:
        run = _running(a)
        snaps.append(_Snap(f"{a.label}.start", a.s_cond, a.s_add | {run}, a.s_del))
        snaps.append(_Snap(f"{a.label}.end", a.e_cond | {run}, a.e_add, a.e_del | {run}))
    for til in task.tils:
        prop = frozenset([til.prop])
        snaps.append(
            _Snap(f"til {format_time(til.time)} {til.prop}", frozenset(), prop if til.positive else frozenset(),
                  frozenset() if til.positive else prop)
        )
    return snaps


def _interferes(x: _Snap, y: _Snap) -> bool:
    return bool(x.dele & (y.pre | y.add)) or bool(y.dele & (x.pre | x.add))


@lru_cache(maxsize=16)
def compute_mutex(task: GroundedTask) -> FrozenSet[FrozenSet[Proposition]]:
    """
    Binary proposition mutexes from a planning-graph fixpoint over snap
    actions (the start and end halves of each durative action).
    """
    snaps = _snap_actions(task)
    props: Set[Proposition] = set(task.init)
    pmutex: Set[FrozenSet[Proposition]] = set()

    def mutex_pre(s: _Snap) -> bool:
        pre = sorted(s.pre)
        return any(frozenset((p, q)) in pmutex for i, p in enumerate(pre) for q in pre[i + 1:])

    level = 0
    while True:
        level += 1
        acts = [s for s in snaps if s.pre <= props and not mutex_pre(s)]
        acts += [_Snap(f"noop {p}", frozenset([p]), frozenset([p]), frozenset()) for p in sorted(props)]

        def amutex(x: _Snap, y: _Snap) -> bool:
            if _interferes(x, y):
                return True
            return any(frozenset((p, q)) in pmutex for p in x.pre for q in y.pre if p != q)

        achievers: Dict[Proposition, List[int]] = {}
        for idx, s in enumerate(acts):
            for p in s.add:
                achievers.setdefault(p, []).append(idx)
        cache: Dict[Tuple[int, int], bool] = {}

        def pair_mutex(i: int, j: int) -> bool:
            if i == j:
                return False
            k = (i, j) if i < j else (j, i)
            if k not in cache:
                cache[k] = amutex(acts[k[0]], acts[k[1]])
            return cache[k]

        new_props = set(achievers)
        ordered = sorted(new_props)
        new_pmutex: Set[FrozenSet[Proposition]] = set()
        for i, p in enumerate(ordered):
            for q in ordered[i + 1:]:
                if all(pair_mutex(a, b) for a in achievers[p] for b in achievers[q]):
                    new_pmutex.add(frozenset((p, q)))
        if new_props == props and new_pmutex == pmutex:
            break
        props, pmutex = new_props, new_pmutex

    result = frozenset(pair for pair in pmutex if not any(p.predicate == "~running" for p in pair))
    logger.debug(f"mutex fixpoint after {level} levels: {len(result)} pairs")
    return result


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def _separations(a: DurativeAction, li: Proposition, lj: Proposition, epsilon: Fraction) -> List[Fraction]:
    at_start = li in a.s_cond or li in a.inv
    at_end = li in a.e_cond
    seps: List[Fraction] = []
    if lj in a.e_add:
        if at_start:
            seps.append(a.dur)
        if at_end:
            seps.append(epsilon)
    if lj in a.s_add:
        if at_start:
            seps.append(Fraction(0))
        if at_end:
            seps.append(-a.dur)
    return seps


def compute_distance(
    actions: Union[DurativeAction, Iterable[DurativeAction]],
    li: Proposition,
    lj: Proposition,
    epsilon: Fraction = DEFAULT_EPSILON,
) -> Fraction:
    """
    Minimal separation between ``li`` being required by an action and ``lj``
    being produced by it, minimised over the witnessing actions.

    Raises:
        NoCausalWitness: no action uses ``li`` and produces ``lj``
    """
    if isinstance(actions, DurativeAction):
        actions = [actions]
    candidates = [d for a in actions for d in _separations(a, li, lj, epsilon)]
    if not candidates:
        raise NoCausalWitness(li, lj)
    return min(candidates)


def need_distance(
    actions: Iterable[DurativeAction], li: Proposition, lj: Proposition, epsilon: Fraction = DEFAULT_EPSILON
) -> Optional[Fraction]:
    """
    Largest separation any witness allows between the last time it needs
    ``li`` and the appearance of ``lj``; None without witnesses.
    """
    per_action = [min(seps) for seps in (_separations(a, li, lj, epsilon) for a in actions) if seps]
    return max(per_action) if per_action else None


def _reachable_without(task: GroundedTask, p: Proposition) -> FrozenSet[Proposition]:
    return trpg_without(task, p).reached


@lru_cache(maxsize=65536)
def relaxed_distance(
    task: GroundedTask,
    li: Proposition,
    lj: Proposition,
    mutexes: FrozenSet[FrozenSet[Proposition]],
) -> Fraction:
    """
    Shortest relaxed time from a state holding ``li`` to ``lj``.

    The start state holds ``li``, every proposition reachable without ``lj``
    that is not mutex with ``li``, and everything a timed literal adds.

    Raises:
        NoCausalWitness: ``lj`` is unreachable from that state
    """
    before = _reachable_without(task, lj)
    state = {p for p in before if frozenset((p, li)) not in mutexes} | {li}
    state |= {til.prop for til in task.tils if til.positive}
    trpg = build_trpg(task, state=state, use_tils=False)
    dist = earliest_time(trpg, lj)
    if dist == INFINITY:
        raise NoCausalWitness(li, lj)
    return Fraction(dist)


def edge_distance(
    tlg: TLG,
    li: Proposition,
    lj: Proposition,
    kind: OrderingKind,
    witnesses: Iterable[DurativeAction] = (),
) -> Fraction:
    """Distance for a new edge; 0 when no chain links the pair"""
    witnesses = list(witnesses)
    try:
        if kind is OrderingKind.NECESSARY and witnesses:
            return compute_distance(witnesses, li, lj, tlg.epsilon)
        if tlg.task is None:
            return Fraction(0)
        return relaxed_distance(tlg.task, li, lj, tlg.mutexes)
    except NoCausalWitness as e:
        logger.debug(f"{e}; using distance 0")
        return Fraction(0)


def link(
    tlg: TLG,
    li: NodeKey,
    lj: NodeKey,
    kind: OrderingKind,
    witnesses: Iterable[DurativeAction] = (),
):
    """Add an edge with its distance (and need, for necessary edges)"""
    witnesses = list(witnesses)
    dist = edge_distance(tlg, li[0], lj[0], kind, witnesses)
    need = need_distance(witnesses, li[0], lj[0], tlg.epsilon) if kind is OrderingKind.NECESSARY else None
    tlg.add_edge(li, lj, kind, dist, [a.label for a in witnesses], need)


# ---------------------------------------------------------------------------
# Initialisation
# ---------------------------------------------------------------------------


def init_tlg(
    lms: LandmarkSet,
    trpg: TemporalRPG,
    horizon: Fraction,
    task: Optional[GroundedTask] = None,
    mutexes: Optional[Iterable[FrozenSet[Proposition]]] = None,
    deadlines: Optional[Dict[Proposition, Fraction]] = None,
) -> TLG:
    """
    Build the landmarks graph: ``min_g`` from the TRPG, ``max_g`` from the
    horizon clipped by deadlines, validity and necessity spanning
    ``[min_g, horizon]``.

    Raises:
        InfeasibleLandmark: a landmark whose earliest time exceeds its
            latest generation time
    """
    epsilon = task.epsilon if task is not None else DEFAULT_EPSILON
    tlg = TLG(horizon, epsilon, task)
    tlg.earliest = dict(trpg.earliest)
    if deadlines is not None:
        tlg.deadlines = dict(deadlines)
    elif task is not None:
        tlg.deadlines = dict(task.deadline_map)
    if mutexes is not None:
        tlg.mutexes = frozenset(mutexes)
    elif task is not None:
        tlg.mutexes = compute_mutex(task)

    for prop in sorted(lms.landmarks):
        lm = tlg.add_landmark(prop, 0)
        if lm.min_g > lm.max_g:
            raise InfeasibleLandmark(lm.label, lm.min_g, lm.max_g)

    for o in sorted(lms.orderings):
        link(tlg, (o.before, 0), (o.after, 0), o.kind, lms.witnesses.get((o.before, o.after), ()))

    logger.info(f"🕸️ TLG with {len(tlg)} landmarks and {tlg.graph.number_of_edges()} edges, horizon {format_time(horizon)}")
    return tlg


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


def _raise_min(lm: TemporalLandmark, end: str, value: TimeValue, reason: str, source: Optional[NodeKey] = None) -> bool:
    if value > getattr(lm, end):
        setattr(lm, end, value)
        lm.provenance[end] = (reason, source)
        return True
    return False


def _lower_max(lm: TemporalLandmark, end: str, value: TimeValue, reason: str, source: Optional[NodeKey] = None) -> bool:
    if value < getattr(lm, end):
        setattr(lm, end, value)
        lm.provenance[end] = (reason, source)
        return True
    return False


def _relation_nodes(tlg: TLG, r: EndpointConstraint) -> Optional[Tuple[TemporalLandmark, Optional[TemporalLandmark]]]:
    if not tlg.has_landmark(r.left_prop):
        return None
    left = tlg.landmark(r.left_prop)
    if r.is_constant:
        return left, None
    if not tlg.has_landmark(r.right_prop):
        return None
    return left, tlg.landmark(r.right_prop)


def _is_pin(r: EndpointConstraint) -> bool:
    return r.relation == "=" and r.left_end in ("max_n", "max_v")


def _round_limit(tlg: TLG) -> int:
    return (len(tlg) + len(tlg.relations) + 2) * (tlg.graph.number_of_edges() + len(tlg.relations) + 2)


def _in_order(items: Sequence[T], rng: Optional[random.Random]) -> List[T]:
    items = list(items)
    if rng is not None:
        rng.shuffle(items)
    return items


def _run_rules(rules: List[Callable[[], bool]], tlg: TLG, rng: Optional[random.Random]) -> int:
    rounds = 0
    changed = True
    while changed and rounds < _round_limit(tlg):
        rounds += 1
        changed = False
        for rule in _in_order(rules, rng):
            changed |= rule()
    return rounds


def _phase_min(tlg: TLG, rng: Optional[random.Random] = None) -> int:
    """Raise min endpoints forward along edges and min/min relations"""

    def nesting() -> bool:
        changed = False
        for lm in _in_order(tlg.landmarks(), rng):
            changed |= _raise_min(lm, "min_v", lm.min_g, "validity starts at generation", lm.key)
            changed |= _raise_min(lm, "min_n", lm.min_v, "necessity within validity", lm.key)
        return changed

    def orderings() -> bool:
        changed = False
        for li, lj, data in _in_order(tlg.edges(), rng):
            a, b = tlg.landmark(li), tlg.landmark(lj)
            changed |= _raise_min(b, "min_v", a.min_v + data["dist"], f"ordering after {a.label}", li)
        return changed

    def relations() -> bool:
        changed = False
        for r in _in_order(tlg.relations, rng):
            nodes = _relation_nodes(tlg, r)
            if nodes is None:
                continue
            left, right = nodes
            if r.relation == "=" and r.left_end == "min_n":
                changed |= _raise_min(left, "min_n", r.offset, f"{r.source}", None)
            elif r.relation == "<=" and right is not None and r.left_end.startswith("min") and r.right_end.startswith("min"):
                changed |= _raise_min(right, r.right_end, getattr(left, r.left_end) - r.offset, str(r), left.key)
        return changed

    return _run_rules([nesting, orderings, relations], tlg, rng)


def _compute_needs(tlg: TLG):
    """How long each landmark occurrence must stay valid, and why"""
    for lm in tlg.landmarks():
        lm.required_until, lm.required_by = None, None

    def need(lm: TemporalLandmark, until: TimeValue, why: str):
        if until == INFINITY:
            return
        if lm.required_until is None or until > lm.required_until:
            lm.required_until, lm.required_by = until, why
        elif until == lm.required_until and why not in SPLITTABLE:
            lm.required_by = why

    for r in tlg.relations:
        if _is_pin(r) and tlg.has_landmark(r.left_prop):
            # a pinned necessity is served by the latest occurrence
            need(tlg.occurrences(r.left_prop)[-1], r.offset, r.source.value if r.source else "constraint")
    for li, lj, data in tlg.edges():
        if data["kind"] is OrderingKind.NECESSARY and data.get("need") is not None:
            need(tlg.landmark(li), tlg.landmark(lj).min_v - data["need"], SUPPORT)


def _phase_max(tlg: TLG, causal: bool = True, mutex: bool = True, rng: Optional[random.Random] = None) -> int:
    """Lower max endpoints backward along edges, mutex pairs and relations"""

    def orderings() -> bool:
        changed = False
        for li, lj, data in _in_order(tlg.edges(), rng):
            a, b = tlg.landmark(li), tlg.landmark(lj)
            if causal:
                changed |= _lower_max(a, "max_g", b.max_g - data["dist"], f"ordering before {b.label}", lj)
            if mutex and tlg.is_mutex(a.prop, b.prop):
                # a must be gone before b appears
                bound = min(b.max_g - data["dist"], b.min_v)
                if b.achieved_at is not None:
                    bound = min(bound, b.achieved_at)
                changed |= _lower_max(a, "max_v", bound, f"mutex with later {b.label}", lj)
        return changed

    def nesting() -> bool:
        changed = False
        for lm in _in_order(tlg.landmarks(), rng):
            changed |= _lower_max(lm, "max_g", lm.max_v, "generation within validity", lm.key)
            changed |= _lower_max(lm, "max_n", lm.max_v, "necessity within validity", lm.key)
        return changed

    def relations() -> bool:
        changed = False
        for r in _in_order(tlg.relations, rng):
            if r.relation != "<=" or not r.left_end.startswith("max"):
                continue
            nodes = _relation_nodes(tlg, r)
            if nodes is None:
                continue
            left, right = nodes
            bound = r.offset if right is None else getattr(right, r.right_end) + r.offset
            changed |= _lower_max(left, r.left_end, bound, str(r), right.key if right else None)
        return changed

    return _run_rules([orderings, nesting, relations], tlg, rng)


def propagate_causal(tlg: TLG, rng: Optional[random.Random] = None) -> TLG:
    """Ordering-edge rules only: min endpoints forward, max_g backward"""
    _phase_min(tlg, rng)
    _compute_needs(tlg)
    _phase_max(tlg, causal=True, mutex=False, rng=rng)
    return tlg


def propagate_mutex(tlg: TLG, rng: Optional[random.Random] = None) -> TLG:
    """Cut validity of ordered mutex landmarks before their successors"""
    _phase_max(tlg, causal=False, mutex=True, rng=rng)
    return tlg


def propagate(tlg: TLG, rng: Optional[random.Random] = None) -> TLG:
    """
    Propagate all rules to a fixpoint.

    Min endpoints are settled first; max endpoints are then lowered with the
    min values fixed, so the result does not depend on the order rules,
    edges and relations are visited in. ``rng`` shuffles that order on every
    round.
    """
    _phase_min(tlg, rng)
    _compute_needs(tlg)
    _phase_max(tlg, causal=True, mutex=True, rng=rng)
    return tlg


# ---------------------------------------------------------------------------
# Consistency
# ---------------------------------------------------------------------------

INCONSISTENT = "tlg-inconsistent"
AT_MOST_ONCE = "at-most-once-violation"


@dataclass(frozen=True)
class Consistent:
    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Inconsistent:
    witness: str
    landmark: Optional[str] = None
    reason: str = INCONSISTENT
    chain: Tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return self.witness


ConsistencyResult = Union[Consistent, Inconsistent]


def witness_chain(tlg: TLG, lm: TemporalLandmark, end: str) -> Tuple[str, ...]:
    """The bounds that produced ``end`` of ``lm``, newest first"""
    chain: List[str] = []
    seen: Set[Tuple[NodeKey, str]] = set()
    current: Optional[TemporalLandmark] = lm
    while current is not None and (current.key, end) not in seen and len(chain) <= len(tlg):
        seen.add((current.key, end))
        reason, source = current.provenance.get(end, ("initial value", None))
        chain.append(f"{end}{current.label}={format_time(getattr(current, end))} ({reason})")
        if source is None or source == current.key or source not in tlg:
            break
        current = tlg.landmark(source)
    return tuple(chain)


def _fail(tlg: TLG, lm: TemporalLandmark, text: str, end: str) -> Inconsistent:
    return Inconsistent(text, lm.label, INCONSISTENT, witness_chain(tlg, lm, end))


def check_consistency(
    tlg: TLG,
    deadlines: Optional[Dict[Proposition, Fraction]] = None,
    splittable: bool = False,
) -> ConsistencyResult:
    """
    Report the first empty interval, broken nesting, unmet necessity,
    violated relation or missed deadline, in landmark order.

    With ``splittable`` an unmet necessity that a later occurrence could
    serve is not reported.
    """
    deadlines = tlg.deadlines if deadlines is None else deadlines
    f = format_time
    for lm in tlg.landmarks():
        if lm.min_v > lm.max_g:
            return _fail(tlg, lm, f"min_v{lm.label}={f(lm.min_v)} > max_g={f(lm.max_g)}", "min_v")
        if lm.min_g > lm.max_g:
            return _fail(tlg, lm, f"min_g{lm.label}={f(lm.min_g)} > max_g={f(lm.max_g)}", "min_g")
        if lm.min_v > lm.max_v:
            return _fail(tlg, lm, f"min_v{lm.label}={f(lm.min_v)} > max_v={f(lm.max_v)}", "min_v")
        if lm.min_n > lm.max_n:
            return _fail(tlg, lm, f"min_n{lm.label}={f(lm.min_n)} > max_n={f(lm.max_n)}", "min_n")
        if lm.min_n < lm.min_v or lm.max_n > lm.max_v:
            return _fail(tlg, lm, f"necessity of {lm.label} outside its validity", "min_n")
        unmet = lm.required_until is not None and lm.required_until > lm.max_v
        if unmet and not (splittable and lm.required_by in SPLITTABLE):
            return _fail(
                tlg,
                lm,
                f"{lm.label} required until {f(lm.required_until)} ({lm.required_by}) but valid only until {f(lm.max_v)}",
                "max_v",
            )
        if lm.occurrence == 0 and lm.prop in deadlines and lm.min_g > deadlines[lm.prop]:
            return _fail(tlg, lm, f"{lm.label} cannot be achieved by its deadline {f(deadlines[lm.prop])}", "min_g")

    for r in tlg.relations:
        nodes = _relation_nodes(tlg, r)
        if nodes is None or not r.left_end.startswith("min") or r.left_end == "min_n" and r.relation == "=":
            continue
        left, right = nodes
        value = getattr(left, r.left_end)
        bound = r.offset if right is None else getattr(right, r.right_end) + r.offset
        if right is not None and r.right_end.startswith("min"):
            continue  # enforced by propagation
        if value > bound:
            return _fail(tlg, left, f"{r} violated: {f(value)} > {f(bound)}", r.left_end)
    return Consistent()


# ---------------------------------------------------------------------------
# Occurrences and orderings
# ---------------------------------------------------------------------------


def _mutex_successors(tlg: TLG, key: NodeKey) -> List[NodeKey]:
    return [m for m in sorted(tlg.graph.successors(key)) if tlg.is_mutex(key[0], m[0])]


def split_occurrence(tlg: TLG, key: Union[NodeKey, TemporalLandmark]) -> TemporalLandmark:
    """
    Add a later occurrence of a landmark whose necessity outlives its
    validity. Necessary edges the old occurrence can no longer serve move to
    the new one, and mutex successors of the old occurrence are ordered
    before the new one.

    Raises:
        NoConflict: necessity already fits within validity
        AtMostOnceViolation: the proposition may only hold once
    """
    lm = key if isinstance(key, TemporalLandmark) else tlg.landmark(key)
    if lm.required_until is None or lm.required_until <= lm.max_v:
        raise NoConflict(lm.label)
    if lm.prop in tlg.at_most_once:
        raise AtMostOnceViolation(lm.prop)

    new = tlg.add_landmark(lm.prop)
    for succ in list(tlg.graph.successors(lm.key)):
        data = tlg.graph.edges[lm.key, succ]
        if data["kind"] is OrderingKind.NECESSARY and data.get("need") is not None:
            if tlg.landmark(succ).min_v - data["need"] > lm.max_v:
                tlg.graph.remove_edge(lm.key, succ)
                tlg.add_edge(new.key, succ, data["kind"], data["dist"], data["witnesses"], data["need"])
    for m in _mutex_successors(tlg, lm.key):
        if not tlg.graph.has_edge(m, new.key) and not tlg.ordered(new.key, m):
            link(tlg, m, new.key, OrderingKind.DEPENDENCY)
    logger.debug(f"split {lm.label} into {new.label}")
    return new


def add_ordering(
    tlg: TLG,
    li: NodeKey,
    lj: NodeKey,
    kind: OrderingKind,
    witnesses: Iterable[DurativeAction] = (),
) -> NodeKey:
    """
    Order ``li`` before ``lj``. When ``lj`` already precedes ``li`` the
    orderings behind it refer to a later occurrence of ``li``; they are moved
    to a new occurrence before the edge is added. Returns the key ``li``
    ends up with.

    Raises:
        AtMostOnceViolation: the later occurrence is forbidden
    """
    if li == lj:
        return li
    if tlg.graph.has_edge(li, lj):
        data = tlg.graph.edges[li, lj]
        if kind is OrderingKind.NECESSARY and data["kind"] is not OrderingKind.NECESSARY:
            tlg.graph.remove_edge(li, lj)
            link(tlg, li, lj, kind, witnesses)
        return li
    if tlg.ordered(lj, li):
        if li[0] in tlg.at_most_once:
            raise AtMostOnceViolation(li[0])
        new = tlg.add_landmark(li[0])
        reach = nx.descendants(tlg.graph, lj) | {lj}
        for pred in [p for p in tlg.graph.predecessors(li) if p in reach]:
            data = tlg.graph.edges[pred, li]
            tlg.graph.remove_edge(pred, li)
            tlg.add_edge(pred, new.key, data["kind"], data["dist"], data["witnesses"], data.get("need"))
        logger.debug(f"ordering {li[0]} before {lj[0]} moved earlier orderings to {new.label}")
        if tlg.ordered(lj, li):
            # still cyclic through non-adjacent paths: keep the graph acyclic
            return li
    link(tlg, li, lj, kind, witnesses)
    return li


def resolve_conflicts(tlg: TLG) -> ConsistencyResult:
    """
    Propagate, splitting occurrences whose necessity outlives validity, then
    check. Each round restarts from the base bounds of the current edges.
    """
    try:
        for _ in range(2 * len(tlg) + 4):
            tlg.reset_bounds()
            propagate(tlg)
            hard = check_consistency(tlg, splittable=True)
            if not hard:
                return hard
            conflicts = [
                lm
                for lm in tlg.landmarks()
                if lm.required_until is not None
                and lm.required_until > lm.max_v
                and lm.required_by in SPLITTABLE
            ]
            if not conflicts:
                break
            for lm in conflicts:
                split_occurrence(tlg, lm)
    except AtMostOnceViolation as e:
        return Inconsistent(str(e), str(e.prop), AT_MOST_ONCE)
    return check_consistency(tlg)


def order_mutex_landmarks(tlg: TLG) -> Tuple[TLG, ConsistencyResult]:
    """
    Case split on unordered mutex landmark pairs: when one order of a pair
    is inconsistent the other is committed; when both are, the graph is
    inconsistent with the first order's witness.
    """
    result = resolve_conflicts(tlg)
    progress = True
    while result and progress:
        progress = False
        for a, b in tlg.mutex_pairs():
            if tlg.ordered(a, b) or tlg.ordered(b, a):
                continue
            branches: List[Tuple[TLG, ConsistencyResult]] = []
            for x, y in ((a, b), (b, a)):
                trial = tlg.copy()
                try:
                    add_ordering(trial, x, y, OrderingKind.DEPENDENCY)
                    branches.append((trial, resolve_conflicts(trial)))
                except AtMostOnceViolation as e:
                    branches.append((trial, Inconsistent(str(e), str(e.prop), AT_MOST_ONCE)))
            viable = [(t, r) for t, r in branches if r]
            if not viable:
                first = branches[0][1]
                logger.info(f"❌ both orders of {a[0]} and {b[0]} fail: {first}")
                return tlg, first
            if len(viable) == 1:
                tlg, result = viable[0]
                first, second = (a, b) if viable[0][0] is branches[0][0] else (b, a)
                logger.debug(f"🔄 committed {first[0]} before {second[0]}")
                progress = True
                break
    return tlg, result


# ---------------------------------------------------------------------------
# Building from a task
# ---------------------------------------------------------------------------


def attach_constraints(tlg: TLG, task: GroundedTask) -> List[CompiledConstraint]:
    """
    Compile the task's trajectory constraints against ``tlg`` and store the
    resulting endpoint relations on it. Plain goals are pinned to the end of
    the plan like ``at end`` constraints.
    """
    compiled = [compile_constraint(c, tlg, tlg.horizon) for c in task.constraints]
    tlg.relations = [r for cc in compiled for r in cc.relations]
    for g in sorted(task.goals):
        if tlg.has_landmark(g):
            tlg.relations.append(
                EndpointConstraint(g, "max_n", None, None, Fraction(tlg.horizon), "=", Modality.AT_END)
            )
    tlg.at_most_once = {p for c in task.constraints if c.op is Modality.AT_MOST_ONCE for p in c.phi}
    return compiled


def build_tlg(
    task: GroundedTask,
    lms: LandmarkSet,
    trpg: Optional[TemporalRPG] = None,
    mutexes: Optional[Iterable[FrozenSet[Proposition]]] = None,
) -> Tuple[TLG, List[CompiledConstraint]]:
    """Unpropagated landmarks graph of ``task`` with its constraint relations"""
    trpg = build_trpg(task) if trpg is None else trpg
    tlg = init_tlg(lms, trpg, task.upper_bound, task, mutexes)
    compiled = attach_constraints(tlg, task)
    return tlg, compiled


def record_achievement(tlg: TLG, key: NodeKey, at: Fraction, until: Optional[Fraction] = None):
    """
    Fix an occurrence to the time a plan achieved it. ``until`` closes its
    validity when the plan has already deleted it.
    """
    lm = tlg.landmark(key)
    lm.achieved_at = at
    lm.closed_at = until
    tlg._init_bounds(lm)


def defer_unmet_orderings(tlg: TLG, key: NodeKey):
    """
    Orderings into an achieved occurrence from landmarks the plan has not
    achieved yet cannot refer to it; they move to the next occurrence.

    Raises:
        AtMostOnceViolation: the next occurrence is forbidden
    """
    late = [p for p in tlg.graph.predecessors(key) if tlg.landmark(p).achieved_at is None]
    if not late:
        return
    prop, occurrence = key
    if prop in tlg.at_most_once:
        raise AtMostOnceViolation(prop)
    nxt = tlg.add_landmark(prop, occurrence + 1)
    for p in late:
        data = tlg.graph.edges[p, key]
        tlg.graph.remove_edge(p, key)
        if not tlg.graph.has_edge(p, nxt.key):
            tlg.add_edge(p, nxt.key, data["kind"], data["dist"], data["witnesses"], data.get("need"))
    logger.debug(f"orderings into {tlg.landmark(key).label} deferred to {nxt.label}")
