"""
Error hierarchy for the temporal landmarks planner.

Every failure raised by the models package derives from ``PlannerError`` so the
agents can catch one type and report ``error_type`` by class name.
"""
from fractions import Fraction
from typing import Any, Optional


class PlannerError(Exception):
    """Base class for all planner errors"""

    #: exit status the command line maps this error to
    exit_code = 1


class PDDLSyntaxError(PlannerError):
    """Malformed PDDL text"""

    def __init__(self, line: Optional[int], expected: str):
        self.line = line
        self.expected = expected
        where = f"line {line}" if line is not None else "unknown line"
        super().__init__(f"syntax error at {where}: expected {expected}")


class UnsupportedFeature(PlannerError):
    """A construct outside the supported PDDL subset"""

    def __init__(self, token: str, line: Optional[int] = None):
        self.token = token
        self.line = line
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"unsupported PDDL feature: {token}{suffix}")


class UnknownModalOperator(PlannerError):
    def __init__(self, name: str, line: Optional[int] = None):
        self.name = name
        self.line = line
        super().__init__(f"unknown modal operator: {name}")


class NestedModality(PlannerError):
    def __init__(self, op: str, line: Optional[int] = None):
        self.op = op
        self.line = line
        super().__init__(f"nested modal operator inside '{op}' is not allowed")


class GroundingError(PlannerError):
    """Inconsistent typing, unbound variables or invalid ground actions"""


class NoUpperBound(PlannerError):
    def __init__(self):
        super().__init__(
            "no deadlines in the problem and no upper bound given; pass --upper-bound"
        )


class ConditionViolation(PlannerError):
    """A plan step whose condition does not hold when required"""

    exit_code = 2

    def __init__(self, action: str, time: Fraction, prop: Any):
        self.action = action
        self.time = time
        self.prop = prop
        super().__init__(f"{action} requires {prop} at t={time}")


class MutexOverlap(PlannerError):
    """Two simultaneous effects or conditions interfere at one instant"""

    exit_code = 2

    def __init__(self, time: Fraction, prop: Any):
        self.time = time
        self.prop = prop
        super().__init__(f"interfering effects on {prop} at t={time}")


class GoalUnreachable(PlannerError):
    exit_code = 2

    def __init__(self, prop: Any):
        self.prop = prop
        super().__init__(f"goal {prop} is unreachable under delete relaxation")


class InfeasibleLandmark(PlannerError):
    """Generation interval empty at initialization"""

    exit_code = 2

    def __init__(self, landmark: str, min_g: Fraction, max_g: Fraction):
        self.landmark = landmark
        self.min_g = min_g
        self.max_g = max_g
        super().__init__(f"landmark {landmark} infeasible: min_g={min_g} > max_g={max_g}")


class NoCausalWitness(PlannerError):
    def __init__(self, li: Any, lj: Any):
        self.li = li
        self.lj = lj
        super().__init__(f"no action chain links {li} to {lj}")


class AtMostOnceViolation(PlannerError):
    exit_code = 2

    def __init__(self, prop: Any):
        self.prop = prop
        super().__init__(f"{prop} would need a second occurrence under at-most-once")


class NoConflict(PlannerError):
    """split_occurrence called on a landmark whose necessity fits its validity"""

    def __init__(self, landmark: str):
        self.landmark = landmark
        super().__init__(f"landmark {landmark} has no necessity/validity conflict")


class ResourceLimit(PlannerError):
    exit_code = 3

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"resource limit reached: {kind}" + (f" ({detail})" if detail else ""))


PARSE_ERRORS = (
    PDDLSyntaxError,
    UnsupportedFeature,
    UnknownModalOperator,
    NestedModality,
    GroundingError,
    NoUpperBound,
)
