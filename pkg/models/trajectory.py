"""
PDDL3.0 state-trajectory constraints.

Holds the constraint records, their compilation into landmark creations and
endpoint constraints on the landmarks graph, the per-node prune predicates and
the formal evaluation of each operator over a finished plan's trajectory.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

from .core_model import INFINITY, Proposition, StateTrajectory, format_time

if TYPE_CHECKING:  # pragma: no cover
    from .search import PartialPlanNode
    from .tlg import TLG

logger = logging.getLogger(__name__)


class Modality(str, Enum):
    AT_END = "at-end"
    ALWAYS = "always"
    AT_MOST_ONCE = "at-most-once"
    SOMETIME = "sometime"
    WITHIN = "within"
    ALWAYS_WITHIN = "always-within"
    SOMETIME_AFTER = "sometime-after"
    SOMETIME_BEFORE = "sometime-before"
    HOLD_DURING = "hold-during"
    HOLD_AFTER = "hold-after"
    # extensions
    PERSISTENCE = "persistence"
    WITHIN_FROM_END = "hold-within-from-end"
    OVERLAPS = "overlaps"
    DURING = "during"

    def __str__(self) -> str:
        return self.value


STANDARD_OPERATORS = (
    Modality.AT_END,
    Modality.ALWAYS,
    Modality.AT_MOST_ONCE,
    Modality.SOMETIME,
    Modality.WITHIN,
    Modality.ALWAYS_WITHIN,
    Modality.SOMETIME_AFTER,
    Modality.SOMETIME_BEFORE,
    Modality.HOLD_DURING,
    Modality.HOLD_AFTER,
)
EXTENSION_OPERATORS = (
    Modality.PERSISTENCE,
    Modality.WITHIN_FROM_END,
    Modality.OVERLAPS,
    Modality.DURING,
)
TWO_ARGUMENT = frozenset(
    {
        Modality.ALWAYS_WITHIN,
        Modality.SOMETIME_AFTER,
        Modality.SOMETIME_BEFORE,
        Modality.WITHIN_FROM_END,
        Modality.OVERLAPS,
        Modality.DURING,
    }
)
TIMED = frozenset(
    {
        Modality.WITHIN,
        Modality.ALWAYS_WITHIN,
        Modality.HOLD_AFTER,
        Modality.PERSISTENCE,
        Modality.WITHIN_FROM_END,
    }
)
# operators whose goal descriptor may be a conjunction of literals
CONJUNCTIVE = frozenset(
    {
        Modality.AT_END,
        Modality.ALWAYS,
        Modality.SOMETIME,
        Modality.WITHIN,
        Modality.HOLD_DURING,
        Modality.HOLD_AFTER,
    }
)


@dataclass(frozen=True)
class TrajectoryConstraint:
    """
    One modal constraint. ``phi``/``psi`` are conjunctions of propositions
    (a single literal is a one-element tuple).
    """

    op: Modality
    phi: Tuple[Proposition, ...]
    psi: Tuple[Proposition, ...] = ()
    t: Optional[Fraction] = None
    u1: Optional[Fraction] = None
    u2: Optional[Fraction] = None

    def __post_init__(self):
        if not self.phi:
            raise ValueError(f"{self.op} needs a goal descriptor")
        if self.op in TWO_ARGUMENT and not self.psi:
            raise ValueError(f"{self.op} needs two goal descriptors")
        if self.op in TIMED and (self.t is None or self.t < 0):
            raise ValueError(f"{self.op} needs a time bound >= 0")
        if self.op is Modality.HOLD_DURING:
            if self.u1 is None or self.u2 is None or self.u1 < 0 or not self.u1 < self.u2:
                raise ValueError("hold-during needs 0 <= u1 < u2")

    @property
    def prop(self) -> Proposition:
        """The single proposition of ``phi``"""
        return self.phi[0]

    @property
    def second(self) -> Optional[Proposition]:
        return self.psi[0] if self.psi else None

    def __str__(self) -> str:
        def gd(props: Tuple[Proposition, ...]) -> str:
            if len(props) == 1:
                return str(props[0])
            return "(and " + " ".join(map(str, props)) + ")"

        head = "at end" if self.op is Modality.AT_END else self.op.value
        parts = [head]
        if self.op is Modality.HOLD_DURING:
            parts += [format_time(self.u1), format_time(self.u2)]
        elif self.t is not None:
            parts.append(format_time(self.t))
        parts.append(gd(self.phi))
        if self.psi:
            parts.append(gd(self.psi))
        return "(" + " ".join(parts) + ")"


# ---------------------------------------------------------------------------
# Formal semantics over finished trajectories
# ---------------------------------------------------------------------------


def _sat(traj: StateTrajectory, i: int, props: Sequence[Proposition]) -> bool:
    return traj.holds(i, props)


def _block_spans(traj: StateTrajectory, props: Sequence[Proposition]) -> List[Tuple[Fraction, Union[Fraction, float]]]:
    """(start time, end time) of each maximal block; end is +inf when it lasts to t_n"""
    times = traj.times
    spans = []
    for i, j in traj.blocks(props):
        end = times[j + 1] if j + 1 < len(times) else INFINITY
        spans.append((times[i], end))
    return spans


def holds_semantics(traj: StateTrajectory, c: TrajectoryConstraint) -> bool:
    """Evaluate ``c`` on a finished plan's trajectory by the operator's definition"""
    n = len(traj) - 1
    t = traj.times
    phi, psi = c.phi, c.psi
    op = c.op

    if op is Modality.AT_END:
        return _sat(traj, n, phi)
    if op is Modality.ALWAYS:
        return all(_sat(traj, i, phi) for i in range(n + 1))
    if op is Modality.SOMETIME:
        return any(_sat(traj, i, phi) for i in range(n + 1))
    if op is Modality.WITHIN:
        return any(_sat(traj, i, phi) and t[i] <= c.t for i in range(n + 1))
    if op is Modality.AT_MOST_ONCE:
        for i in range(n + 1):
            if not _sat(traj, i, phi):
                continue
            if not any(
                all(_sat(traj, k, phi) for k in range(i, j + 1))
                and all(not _sat(traj, k, phi) for k in range(j + 1, n + 1))
                for j in range(i, n + 1)
            ):
                return False
        return True
    if op is Modality.ALWAYS_WITHIN:
        return all(
            any(_sat(traj, j, psi) and t[j] - t[i] <= c.t for j in range(i, n + 1))
            for i in range(n + 1)
            if _sat(traj, i, phi)
        )
    if op is Modality.SOMETIME_AFTER:
        return all(
            any(_sat(traj, j, psi) for j in range(i, n + 1)) for i in range(n + 1) if _sat(traj, i, phi)
        )
    if op is Modality.SOMETIME_BEFORE:
        return all(any(_sat(traj, j, psi) for j in range(0, i)) for i in range(n + 1) if _sat(traj, i, phi))
    if op is Modality.HOLD_DURING:
        u1, u2 = c.u1, c.u2
        if t[n] > u1:
            inside = all(_sat(traj, i, phi) for i in range(n + 1) if u1 <= t[i] < u2)
            current = all(_sat(traj, j, phi) for j in range(n) if t[j] <= u1 < t[j + 1])
            return inside and current
        return _sat(traj, n, phi)
    if op is Modality.HOLD_AFTER:
        if t[n] > c.t:
            return any(_sat(traj, i, phi) and t[i] > c.t for i in range(n + 1))
        return _sat(traj, n, phi)

    if op is Modality.PERSISTENCE:
        return all(end == INFINITY or end - start >= c.t for start, end in _block_spans(traj, phi))
    if op is Modality.WITHIN_FROM_END:
        for _, end in _block_spans(traj, phi):
            if end == INFINITY:
                continue
            if not any(_sat(traj, k, psi) and end <= t[k] <= end + c.t for k in range(n + 1)):
                return False
        return True
    if op is Modality.OVERLAPS:
        return any(
            s1 < s2 < e1 < e2
            for s1, e1 in _block_spans(traj, phi)
            for s2, e2 in _block_spans(traj, psi)
        )
    if op is Modality.DURING:
        return any(
            s2 < s1 and e1 < e2
            for s1, e1 in _block_spans(traj, phi)
            for s2, e2 in _block_spans(traj, psi)
        )
    raise ValueError(f"unknown operator {op}")


# ---------------------------------------------------------------------------
# Compilation into landmark creations and endpoint relations
# ---------------------------------------------------------------------------

ENDPOINTS = ("min_g", "max_g", "min_v", "max_v", "min_n", "max_n")


@dataclass(frozen=True)
class EndpointConstraint:
    """
    ``left <= right + offset`` (or ``=``) over landmark interval endpoints.
    ``right_prop`` is None when the right side is the constant ``offset``.
    """

    left_prop: Proposition
    left_end: str
    right_prop: Optional[Proposition] = None
    right_end: Optional[str] = None
    offset: Fraction = Fraction(0)
    relation: str = "<="
    source: Optional[Modality] = None

    def __post_init__(self):
        if self.left_end not in ENDPOINTS or (self.right_end is not None and self.right_end not in ENDPOINTS):
            raise ValueError(f"unknown endpoint in {self}")
        if self.relation not in ("<=", "="):
            raise ValueError(f"unsupported relation {self.relation}")

    @property
    def is_constant(self) -> bool:
        return self.right_prop is None

    def __str__(self) -> str:
        left = f"{self.left_end}{self.left_prop}"
        if self.is_constant:
            return f"{left} {self.relation} {format_time(self.offset)}"
        right = f"{self.right_end}{self.right_prop}"
        if self.offset:
            sign = "+" if self.offset > 0 else "-"
            right += f" {sign} {format_time(abs(self.offset))}"
        return f"{left} {self.relation} {right}"


def _le(left_prop, left_end, right_prop=None, right_end=None, offset=Fraction(0), source=None) -> EndpointConstraint:
    return EndpointConstraint(left_prop, left_end, right_prop, right_end, Fraction(offset), "<=", source)


def _eq(left_prop, left_end, value, source=None) -> EndpointConstraint:
    return EndpointConstraint(left_prop, left_end, None, None, Fraction(value), "=", source)


class PruneClass(str, Enum):
    ALWAYS_CHECKABLE = "always-checkable"
    DEADLINE_CHECKABLE = "deadline-checkable"
    FINISHED_PLAN_ONLY = "finished-plan-only"


@dataclass(frozen=True)
class CompiledConstraint:
    constraint: TrajectoryConstraint
    new_landmarks: Tuple[Proposition, ...]
    relations: Tuple[EndpointConstraint, ...]
    prune_class: PruneClass
    deadline: Optional[Fraction] = None


# landmark-creation rows: operators that turn phi into a landmark
_CREATES_PHI = frozenset(
    {
        Modality.AT_END,
        Modality.ALWAYS,
        Modality.SOMETIME,
        Modality.WITHIN,
        Modality.HOLD_DURING,
        Modality.HOLD_AFTER,
    }
)
# operators that need psi once phi is a landmark
_CREATES_PSI = frozenset({Modality.ALWAYS_WITHIN, Modality.SOMETIME_AFTER, Modality.SOMETIME_BEFORE})
_CREATES_BOTH = frozenset({Modality.OVERLAPS, Modality.DURING})

_PRUNE_CLASS = {
    Modality.AT_END: PruneClass.FINISHED_PLAN_ONLY,
    Modality.ALWAYS: PruneClass.ALWAYS_CHECKABLE,
    Modality.AT_MOST_ONCE: PruneClass.ALWAYS_CHECKABLE,
    Modality.SOMETIME: PruneClass.FINISHED_PLAN_ONLY,
    Modality.WITHIN: PruneClass.DEADLINE_CHECKABLE,
    Modality.ALWAYS_WITHIN: PruneClass.DEADLINE_CHECKABLE,
    Modality.SOMETIME_AFTER: PruneClass.FINISHED_PLAN_ONLY,
    Modality.SOMETIME_BEFORE: PruneClass.ALWAYS_CHECKABLE,
    Modality.HOLD_DURING: PruneClass.ALWAYS_CHECKABLE,
    Modality.HOLD_AFTER: PruneClass.FINISHED_PLAN_ONLY,
    Modality.PERSISTENCE: PruneClass.FINISHED_PLAN_ONLY,
    Modality.WITHIN_FROM_END: PruneClass.FINISHED_PLAN_ONLY,
    Modality.OVERLAPS: PruneClass.FINISHED_PLAN_ONLY,
    Modality.DURING: PruneClass.FINISHED_PLAN_ONLY,
}


def landmarks_created(c: TrajectoryConstraint, is_landmark) -> Tuple[Proposition, ...]:
    """Propositions ``c`` makes mandatory, given a landmark membership test"""
    if c.op in _CREATES_PHI:
        return c.phi
    if c.op in _CREATES_PSI:
        return c.psi if all(is_landmark(p) for p in c.phi) else ()
    if c.op in _CREATES_BOTH:
        return c.phi + c.psi
    return ()


def compile(c: TrajectoryConstraint, tlg: "TLG", t_n: Fraction) -> CompiledConstraint:  # noqa: A001
    """
    Translate ``c`` into the landmarks it creates and the endpoint relations
    it imposes. Relations are only emitted over propositions that are
    landmarks of ``tlg`` (or that ``c`` itself creates).
    """
    new = landmarks_created(c, tlg.has_landmark)
    known = set(new) | {p for p in c.phi + c.psi if tlg.has_landmark(p)}
    op = c.op
    rel: List[EndpointConstraint] = []

    def each(props):
        return [p for p in props if p in known]

    if op is Modality.AT_END:
        for p in each(c.phi):
            rel += [_eq(p, "max_v", t_n, op), _eq(p, "max_n", t_n, op)]
    elif op is Modality.ALWAYS:
        for p in each(c.phi):
            rel += [_eq(p, "min_v", 0, op), _eq(p, "min_n", 0, op), _eq(p, "max_v", t_n, op), _eq(p, "max_n", t_n, op)]
    elif op is Modality.AT_MOST_ONCE:
        rel += [_le(p, "max_g", offset=t_n, source=op) for p in each(c.phi)]
    elif op is Modality.SOMETIME:
        rel += [_le(p, "max_g", offset=t_n, source=op) for p in each(c.phi)]
    elif op is Modality.WITHIN:
        rel += [_le(p, "max_g", offset=c.t, source=op) for p in each(c.phi)]
    elif op in (Modality.ALWAYS_WITHIN, Modality.SOMETIME_BEFORE, Modality.WITHIN_FROM_END,
                Modality.OVERLAPS, Modality.SOMETIME_AFTER):
        phi, psi = c.prop, c.second
        if phi in known and psi in known:
            if op is Modality.ALWAYS_WITHIN:
                rel.append(_le(psi, "max_g", phi, "max_g", c.t, op))
            elif op is Modality.SOMETIME_BEFORE:
                rel.append(_le(psi, "max_g", phi, "max_g", 0, op))
            elif op is Modality.WITHIN_FROM_END:
                rel.append(_le(psi, "max_g", phi, "max_v", c.t, op))
            elif op is Modality.OVERLAPS:
                rel.append(_le(psi, "max_g", phi, "max_v", 0, op))
            else:
                rel.append(_le(phi, "max_g", psi, "max_v", 0, op))
    elif op is Modality.DURING:
        phi, psi = c.prop, c.second
        if phi in known and psi in known:
            rel += [_le(psi, "max_g", phi, "max_g", 0, op), _le(phi, "max_v", psi, "max_v", 0, op)]
    elif op is Modality.HOLD_DURING:
        u1, u2 = c.u1, c.u2
        for p in each(c.phi):
            if u2 <= t_n:
                rel += [_le(p, "min_n", offset=u1, source=op), _eq(p, "max_n", u2, op)]
            elif u1 < t_n:
                rel += [_le(p, "min_n", offset=u1, source=op), _eq(p, "max_n", t_n, op)]
            else:
                rel += [_eq(p, "min_n", t_n, op), _eq(p, "max_n", t_n, op)]
    elif op is Modality.HOLD_AFTER:
        rel += [_eq(p, "max_n", min(c.t, t_n), op) for p in each(c.phi)]
    elif op is Modality.PERSISTENCE:
        rel += [_le(p, "max_g", p, "max_n", -c.t, op) for p in each(c.phi)]

    deadline = c.t if op in (Modality.WITHIN, Modality.ALWAYS_WITHIN) else None
    return CompiledConstraint(c, tuple(new), tuple(rel), _PRUNE_CLASS[op], deadline)


# ---------------------------------------------------------------------------
# Pruning partial plans
# ---------------------------------------------------------------------------

ALWAYS_VIOLATION = "always-violation"
AT_MOST_ONCE_VIOLATION = "at-most-once-violation"
WITHIN_EXPIRED = "within-expired"
ALWAYS_WITHIN_EXPIRED = "always-within-expired"
SOMETIME_BEFORE_VIOLATION = "sometime-before-violation"
HOLD_DURING_VIOLATION = "hold-during-violation"
TLG_INCONSISTENT = "tlg-inconsistent"
DEADLINE_MISSED = "deadline-missed"


@dataclass(frozen=True)
class Keep:
    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class Prune:
    reason: str
    detail: str = ""

    def __bool__(self) -> bool:
        return True


KEEP = Keep()
PruneDecision = Union[Keep, Prune]


def _fixed(traj: StateTrajectory, now: Fraction) -> List[int]:
    """Happenings strictly before ``now``; later starts cannot change them"""
    return [i for i, t in enumerate(traj.times) if t < now]


def _check_one(node: "PartialPlanNode", cc: CompiledConstraint) -> PruneDecision:
    c = cc.constraint
    traj: StateTrajectory = node.trajectory
    now = node.now
    times = traj.times
    phi, psi = c.phi, c.psi

    if c.op is Modality.ALWAYS:
        for i in range(len(traj)):
            if not traj.holds(i, phi):
                return Prune(ALWAYS_VIOLATION, f"{c} fails at t={format_time(times[i])}")
    elif c.op is Modality.AT_MOST_ONCE:
        if len(traj.blocks(phi)) >= 2:
            return Prune(AT_MOST_ONCE_VIOLATION, f"{c}: a second occurrence was introduced")
    elif c.op is Modality.WITHIN:
        if now > c.t and not any(traj.holds(i, phi) and times[i] <= c.t for i in range(len(traj))):
            return Prune(WITHIN_EXPIRED, f"{c}: not achieved by {format_time(c.t)}")
    elif c.op is Modality.ALWAYS_WITHIN:
        fixed = _fixed(traj, now)
        for i in fixed:
            if not traj.holds(i, phi) or times[i] + c.t >= now:
                continue
            if not any(traj.holds(j, psi) for j in fixed if j >= i and times[j] <= times[i] + c.t):
                return Prune(ALWAYS_WITHIN_EXPIRED, f"{c}: window from t={format_time(times[i])} expired")
    elif c.op is Modality.SOMETIME_BEFORE:
        for i in _fixed(traj, now):
            if traj.holds(i, phi) and not any(traj.holds(j, psi) for j in range(i)):
                return Prune(SOMETIME_BEFORE_VIOLATION, f"{c}: first held at t={format_time(times[i])}")
    elif c.op is Modality.HOLD_DURING:
        return _check_hold_during(node, c)
    return KEEP


def _check_hold_during(node: "PartialPlanNode", c: TrajectoryConstraint) -> PruneDecision:
    traj: StateTrajectory = node.trajectory
    u1, u2, now = c.u1, c.u2, node.now
    times = traj.times
    for i in _fixed(traj, now):
        if u1 <= times[i] < u2 and not traj.holds(i, c.phi):
            return Prune(HOLD_DURING_VIOLATION, f"{c}: broken at t={format_time(times[i])}")
    # a delete at ``now`` cannot be undone by another start at ``now``
    for i, t in enumerate(times):
        if t == now and u1 < t < u2 and i > 0 and traj.holds(i - 1, c.phi) and not traj.holds(i, c.phi):
            return Prune(HOLD_DURING_VIOLATION, f"{c}: deleted at t={format_time(t)}")
    if now > u1:
        current = max(i for i, t in enumerate(times) if t <= u1)
        if not traj.holds(current, c.phi):
            return Prune(HOLD_DURING_VIOLATION, f"{c}: false at t={format_time(u1)}")
    # scheduled ends that delete phi inside the window happen regardless
    for step in node.plan.steps:
        if step.end >= now and u1 <= step.end < u2 and step.action.e_del & set(c.phi):
            return Prune(HOLD_DURING_VIOLATION, f"{c}: {step.action.label} deletes it at t={format_time(step.end)}")
    return KEEP


def prune_check(node: "PartialPlanNode", compiled: Sequence[CompiledConstraint]) -> PruneDecision:
    """
    Decide whether ``node`` can be discarded.

    Only constraints that can be judged on a partial plan prune; the
    finished-plan-only ones are left to the goal test.
    """
    if node.violation is not None:
        return node.violation
    horizon = getattr(node, "horizon", None)
    if horizon is not None and node.plan.makespan > horizon:
        return Prune(DEADLINE_MISSED, f"makespan {format_time(node.plan.makespan)} > {format_time(horizon)}")
    for cc in compiled:
        if cc.prune_class is PruneClass.FINISHED_PLAN_ONLY:
            continue
        decision = _check_one(node, cc)
        if decision:
            logger.debug(f"✂️ prune {decision.reason}: {decision.detail}")
            return decision
    return KEEP
