"""
Reports for plans, validation verdicts and landmarks graphs.

Text and DOT output are rendered from jinja2 templates; JSON output uses
exact rationals written as ``num/den`` strings.
"""
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple, Union

from jinja2 import Template

from .core_model import GroundedTask, StateTrajectory, TemporalPlan, format_time, reconstruct_trajectory
from .exceptions import ConditionViolation, MutexOverlap
from .tlg import TLG
from .trajectory import Modality, TrajectoryConstraint, holds_semantics

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Plan validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintVerdict:
    constraint: str
    holds: bool
    # happening index that satisfies or breaks the constraint, when one does
    witness: Optional[int] = None
    time: Optional[Fraction] = None


@dataclass
class ValidationReport:
    valid: bool
    makespan: Fraction = Fraction(0)
    error: Optional[str] = None
    error_type: Optional[str] = None
    goals_missing: List[str] = field(default_factory=list)
    verdicts: List[ConstraintVerdict] = field(default_factory=list)
    happenings: int = 0

    @property
    def violated(self) -> List[ConstraintVerdict]:
        return [v for v in self.verdicts if not v.holds]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "valid": self.valid,
            "makespan": format_time(self.makespan),
            "error": self.error,
            "error_type": self.error_type,
            "goals_missing": self.goals_missing,
            "happenings": self.happenings,
            "constraints": [
                {
                    "constraint": v.constraint,
                    "holds": v.holds,
                    "witness": v.witness,
                    "time": None if v.time is None else format_time(v.time),
                }
                for v in self.verdicts
            ],
        }


_EXISTENTIAL = (Modality.SOMETIME, Modality.WITHIN, Modality.HOLD_AFTER)
_UNIVERSAL = (Modality.ALWAYS, Modality.HOLD_DURING)


def _witness(traj: StateTrajectory, c: TrajectoryConstraint, holds: bool) -> Optional[int]:
    times = traj.times
    if c.op is Modality.AT_END:
        return len(traj) - 1
    if holds and c.op in _EXISTENTIAL:
        for i in range(len(traj)):
            if not traj.holds(i, c.phi):
                continue
            if c.op is Modality.WITHIN and times[i] > c.t:
                continue
            if c.op is Modality.HOLD_AFTER and times[i] <= c.t:
                continue
            return i
    if not holds and c.op in _UNIVERSAL:
        for i in range(len(traj)):
            if c.op is Modality.HOLD_DURING and not c.u1 <= times[i] < c.u2:
                continue
            if not traj.holds(i, c.phi):
                return i
    if not holds and c.op is Modality.AT_MOST_ONCE:
        blocks = traj.blocks(c.phi)
        return blocks[1][0] if len(blocks) > 1 else None
    return None


def validate_plan(task: GroundedTask, plan: TemporalPlan) -> ValidationReport:
    """
    Execute ``plan`` and judge the goals and every trajectory constraint on
    the resulting trajectory. Execution failures make the plan invalid
    without constraint verdicts.
    """
    try:
        traj = reconstruct_trajectory(task, plan)
    except (ConditionViolation, MutexOverlap) as e:
        logger.info(f"❌ plan does not execute: {e}")
        return ValidationReport(False, plan.makespan, str(e), type(e).__name__)

    missing = sorted(str(g) for g in task.goals - traj.final.state)
    verdicts = []
    for c in task.constraints:
        ok = holds_semantics(traj, c)
        i = _witness(traj, c, ok)
        verdicts.append(ConstraintVerdict(str(c), ok, i, None if i is None else traj.times[i]))
    beyond = task.upper_bound and plan.makespan > task.upper_bound
    valid = not missing and all(v.holds for v in verdicts)
    report = ValidationReport(valid, plan.makespan, goals_missing=missing, verdicts=verdicts, happenings=len(traj))
    if beyond:
        logger.warning(f"plan makespan {format_time(plan.makespan)} exceeds the horizon {format_time(task.upper_bound)}")
    logger.info(f"{'✅' if valid else '❌'} plan validated: {len(report.violated)} constraints violated")
    return report


VALIDATION_TEXT = Template(
    """\
{% if report.valid %}Plan valid{% else %}Plan invalid{% endif %} (makespan {{ makespan }}, {{ report.happenings }} happenings)
{% if report.error %}execution error ({{ report.error_type }}): {{ report.error }}
{% endif %}{% for g in report.goals_missing %}goal not reached: {{ g }}
{% endfor %}{% for v in verdicts %}{{ "ok  " if v.holds else "FAIL" }} {{ v.constraint }}{% if v.witness is not none %}  [happening {{ v.witness }} at t={{ v.time }}]{% endif %}
{% endfor %}"""
)


def render_validation_text(report: ValidationReport) -> str:
    verdicts = [
        {"holds": v.holds, "constraint": v.constraint, "witness": v.witness,
         "time": None if v.time is None else format_time(v.time)}
        for v in report.verdicts
    ]
    return VALIDATION_TEXT.render(report=report, makespan=format_time(report.makespan), verdicts=verdicts)


# ---------------------------------------------------------------------------
# Landmarks graphs
# ---------------------------------------------------------------------------

TLG_DOT = Template(
    """\
digraph "{{ title }}" {
  rankdir=LR;
  node [shape=box, fontname="monospace"];
{% for n in nodes %}  "{{ n.id }}" [label="{{ n.label }}\\ng{{ n.gen }} v{{ n.val }} n{{ n.nec }}"];
{% endfor %}{% for e in edges %}  "{{ e.source }}" -> "{{ e.target }}" [label="{{ e.label }}"{% if e.dashed %}, style=dashed{% endif %}];
{% endfor %}}
"""
)

TLG_TEXT = Template(
    """\
{{ title }}: {{ nodes | length }} landmarks, {{ edges | length }} orderings, horizon {{ horizon }}
{% for n in nodes %}  {{ n.label }}  g{{ n.gen }} v{{ n.val }} n{{ n.nec }}{% if n.required %}  needed until {{ n.required }}{% endif %}
{% endfor %}{% for e in edges %}  {{ e.source }} <{{ e.label }} {{ e.target }}
{% endfor %}"""
)


def _interval(lo: Union[Fraction, float], hi: Union[Fraction, float], decimal: bool) -> str:
    return f"[{format_time(lo, decimal)},{format_time(hi, decimal)}]"


def _graph_context(tlg: TLG, decimal: bool) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    nodes = [
        {
            "id": lm.label,
            "label": lm.label,
            "gen": _interval(*lm.gen, decimal),
            "val": _interval(*lm.val, decimal),
            "nec": _interval(*lm.nec, decimal),
            "required": None if lm.required_until is None else format_time(lm.required_until, decimal),
        }
        for lm in tlg.landmarks()
    ]
    edges = [
        {
            "source": tlg.landmark(a).label,
            "target": tlg.landmark(b).label,
            "label": f"{data['kind'].symbol}({format_time(data['dist'], decimal)})",
            "dashed": data["kind"].symbol == "d",
        }
        for a, b, data in tlg.edges()
    ]
    return nodes, edges


def render_tlg_dot(tlg: TLG, title: str = "TLG", decimal: bool = False) -> str:
    nodes, edges = _graph_context(tlg, decimal)
    return TLG_DOT.render(title=title, nodes=nodes, edges=edges)


def render_tlg_text(tlg: TLG, title: str = "TLG", decimal: bool = False) -> str:
    nodes, edges = _graph_context(tlg, decimal)
    return TLG_TEXT.render(title=title, nodes=nodes, edges=edges, horizon=format_time(tlg.horizon, decimal))


def tlg_to_json(tlg: TLG) -> str:
    return json.dumps(tlg.to_dict(), indent=2, sort_keys=True) + "\n"


def tlg_from_json(text: str) -> TLG:
    return TLG.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Search results
# ---------------------------------------------------------------------------

RESULT_TEXT = Template(
    """\
{% if solved %}; solution found, makespan {{ makespan }}
{{ plan }}{% else %}; unsolvable ({{ reason }}){% if before_search %} before search{% endif %}
; {{ witness }}
{% for line in chain %};   {{ line }}
{% endfor %}{% endif %}; {{ stats.nodes_expanded }} expanded, {{ stats.nodes_generated }} generated, {{ stats.nodes_pruned }} pruned
"""
)


def result_to_dict(result: Any, decimal: bool = False) -> Dict[str, Any]:
    """JSON-ready form of a search result"""
    data: Dict[str, Any] = {"solved": result.solved, "stats": result.stats.to_dict()}
    if result.solved:
        data["makespan"] = format_time(result.plan.makespan, decimal)
        data["plan"] = result.plan.to_ipc(decimal).splitlines()
    else:
        data.update(
            {
                "reason": result.reason,
                "witness": result.witness,
                "landmark": result.landmark,
                "chain": list(result.chain),
                "before_search": result.before_search,
            }
        )
    data["pruned"] = result.prune_log.reasons()
    return data


def render_result_text(result: Any, decimal: bool = False) -> str:
    return RESULT_TEXT.render(
        solved=result.solved,
        makespan=format_time(result.plan.makespan, decimal) if result.solved else None,
        plan=result.plan.to_ipc(decimal) if result.solved else "",
        reason=getattr(result, "reason", None),
        witness=getattr(result, "witness", None),
        chain=getattr(result, "chain", ()),
        before_search=getattr(result, "before_search", False),
        stats=result.stats,
    )
