"""
Models package: PDDL reading, relaxed reachability, temporal landmarks,
trajectory constraints and the partial-plan search built on them.
"""
import logging

logger = logging.getLogger(__name__)

from .core_model import GroundedTask, Proposition, TemporalPlan, reconstruct_trajectory  # noqa: E402
from .exceptions import PARSE_ERRORS, PlannerError  # noqa: E402
from .landmarks import LandmarkSet, derive_temporal_landmarks, extract_causal_landmarks  # noqa: E402
from .pddl_parser import load_task, parse_domain, parse_plan, parse_problem  # noqa: E402
from .reporting import ValidationReport, validate_plan  # noqa: E402
from .search import RootAnalysis, Solution, Unsolvable, build_root_tlg, solve  # noqa: E402
from .tlg import TLG, check_consistency, propagate  # noqa: E402

__all__ = [
    "GroundedTask",
    "Proposition",
    "TemporalPlan",
    "reconstruct_trajectory",
    "PARSE_ERRORS",
    "PlannerError",
    "LandmarkSet",
    "derive_temporal_landmarks",
    "extract_causal_landmarks",
    "load_task",
    "parse_domain",
    "parse_plan",
    "parse_problem",
    "ValidationReport",
    "validate_plan",
    "RootAnalysis",
    "Solution",
    "Unsolvable",
    "build_root_tlg",
    "solve",
    "TLG",
    "check_consistency",
    "propagate",
]
