"""
Command-line interface.

    lmplan plan DOMAIN PROBLEM [--upper-bound T] [--max-nodes N] ...
    lmplan validate DOMAIN PROBLEM PLAN
    lmplan tlg DOMAIN PROBLEM [--format dot|json|text]

Exit status: 0 success, 1 parse/grounding/input error, 2 unsolvable task or
invalid plan, 3 resource limit.
"""
import argparse
import asyncio
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from agents import AgentCoordinator, GraphAgent, PlanningAgent, ValidationAgent
from config import load_planner_config, settings
from models.core_model import format_time, to_time

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_FAILED, EXIT_LIMIT = 0, 1, 2, 3

AGENT_FOR = {"plan": "PlanningAgent", "validate": "ValidationAgent", "tlg": "GraphAgent"}


class RunConfig(BaseModel):
    """One validated invocation"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    command: Literal["plan", "validate", "tlg"]
    domain_path: Path
    problem_path: Path
    plan_path: Optional[Path] = None
    upper_bound_override: Optional[Fraction] = None
    epsilon: Fraction = Fraction(1, 1000)
    max_nodes: int = 200000
    max_seconds: float = 300.0
    jobs: int = 1
    output_format: Literal["text", "json", "dot"] = "text"
    decimal: bool = False
    output_path: Optional[Path] = None
    prune: bool = True

    @field_validator("upper_bound_override", "epsilon", mode="before")
    @classmethod
    def _rational(cls, value: Any) -> Optional[Fraction]:
        if value is None:
            return None
        try:
            t = to_time(value)
        except (ValueError, ZeroDivisionError, TypeError) as e:
            raise ValueError(f"not a rational number: {value!r}") from e
        if t <= 0:
            raise ValueError(f"must be positive, got {format_time(t)}")
        return t

    @field_validator("domain_path", "problem_path", "plan_path")
    @classmethod
    def _exists(cls, value: Optional[Path]) -> Optional[Path]:
        if value is not None and not value.is_file():
            raise ValueError(f"file not found: {value}")
        return value

    @field_validator("max_nodes", "jobs")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("max_seconds")
    @classmethod
    def _positive_float(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @model_validator(mode="after")
    def _plan_for_validate(self) -> "RunConfig":
        if self.command == "validate" and self.plan_path is None:
            raise ValueError("validate needs a plan file")
        return self

    def request(self) -> Dict[str, Any]:
        """Agent input for this invocation"""
        data: Dict[str, Any] = {
            "type": self.command,
            "domain_path": str(self.domain_path),
            "problem_path": str(self.problem_path),
            "upper_bound": self.upper_bound_override,
            "epsilon": self.epsilon,
            "max_nodes": self.max_nodes,
            "max_seconds": self.max_seconds,
            "jobs": self.jobs,
            "format": self.output_format if self.command == "tlg" else "text",
            "decimal": self.decimal,
            "prune": self.prune,
        }
        if self.plan_path is not None:
            data["plan_path"] = str(self.plan_path)
        return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmplan", description=f"{settings.APP_NAME}: temporal landmarks for PDDL3.0 trajectory constraints"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    parser.add_argument("command", choices=["plan", "validate", "tlg"])
    parser.add_argument("domain")
    parser.add_argument("problem")
    parser.add_argument("plan", nargs="?", help="IPC plan file (validate)")
    parser.add_argument("--upper-bound", dest="upper_bound", help="makespan bound T; default is the latest deadline")
    parser.add_argument("--epsilon", help="separation between dependent happenings, e.g. 1/1000")
    parser.add_argument("--max-nodes", dest="max_nodes", type=int)
    parser.add_argument("--max-seconds", dest="max_seconds", type=float)
    parser.add_argument("--jobs", type=int, help="worker threads for child evaluation")
    parser.add_argument("--format", dest="output_format", choices=["text", "json", "dot"])
    parser.add_argument("--decimal", action="store_true", default=None, help="print times as decimals (lossy)")
    parser.add_argument("--output", "-o", dest="output_path", help="write the plan (plan) or graphs (tlg) here")
    parser.add_argument("--no-prune", dest="prune", action="store_false", help="plain search without landmarks")
    parser.add_argument("--config", help="planner YAML file")
    parser.add_argument("--log-level", dest="log_level")
    return parser


def _first(*values: Any) -> Any:
    for v in values:
        if v is not None:
            return v
    return None


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Flags override environment variables, which override the YAML file"""
    yaml_cfg = load_planner_config(args.config) if args.config else load_planner_config()
    search, time_cfg, output = yaml_cfg["search"], yaml_cfg["time"], yaml_cfg["output"]
    return RunConfig(
        command=args.command,
        domain_path=Path(args.domain),
        problem_path=Path(args.problem),
        plan_path=Path(args.plan) if args.plan else None,
        upper_bound_override=args.upper_bound,
        epsilon=_first(args.epsilon, settings.EPSILON, time_cfg.get("epsilon"), "1/1000"),
        max_nodes=_first(args.max_nodes, settings.MAX_NODES, search.get("max_nodes"), 200000),
        max_seconds=_first(args.max_seconds, settings.MAX_SECONDS, search.get("max_seconds"), 300.0),
        jobs=_first(args.jobs, settings.JOBS, search.get("jobs"), 1),
        output_format=_first(args.output_format, settings.OUTPUT_FORMAT, output.get("format"), "text"),
        decimal=_first(args.decimal, output.get("decimal"), False),
        output_path=Path(args.output_path) if args.output_path else None,
        prune=args.prune,
    )


def _coordinator(cfg: RunConfig) -> AgentCoordinator:
    agent_config = {
        "search": {"max_nodes": cfg.max_nodes, "max_seconds": cfg.max_seconds, "jobs": cfg.jobs},
        "output": {"format": cfg.output_format, "decimal": cfg.decimal},
    }
    coordinator = AgentCoordinator()
    for agent in (PlanningAgent(agent_config), ValidationAgent(agent_config), GraphAgent(agent_config)):
        coordinator.register_agent(agent)
    return coordinator


def _emit(text: str, path: Optional[Path] = None):
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        path.write_text(text)


def _report_failure(outcome: Dict[str, Any], cfg: RunConfig) -> int:
    code = outcome.get("exit_code", EXIT_INPUT)
    if cfg.output_format == "json":
        _emit(json.dumps({"error": outcome.get("error"), "error_type": outcome.get("error_type")}, indent=2))
    else:
        sys.stderr.write(f"error ({outcome.get('error_type')}): {outcome.get('error')}\n")
    return code


def run(cfg: RunConfig) -> int:
    """Run one command and print its output; returns the exit status"""
    coordinator = _coordinator(cfg)
    workflow = [{"agent": AGENT_FOR[cfg.command], "input": cfg.request()}]
    outcome = asyncio.run(coordinator.execute_workflow(workflow))
    logger.debug(f"agent status: {coordinator.get_all_status()}")
    step = outcome["results"].get(AGENT_FOR[cfg.command], {})
    if not step.get("success"):
        return _report_failure(step, cfg)

    result = step["result"]
    if cfg.command == "plan":
        if cfg.output_format == "json":
            _emit(json.dumps(result["report"], indent=2))
        else:
            _emit(result["text"])
        if result["plan"] is not None and cfg.output_path is not None:
            _emit(result["plan"], cfg.output_path)
    elif cfg.command == "validate":
        _emit(json.dumps(result["report"], indent=2) if cfg.output_format == "json" else result["text"])
    else:
        if cfg.output_format == "json":
            text = json.dumps({"before": json.loads(result["before"]), "after": json.loads(result["after"]),
                               "consistent": result["consistent"], "witness": result["witness"]}, indent=2)
        else:
            text = result["before"] + "\n" + result["after"]
            if not result["consistent"]:
                text += f"\n; inconsistent: {result['witness']}\n"
        _emit(text, cfg.output_path)
    return result["exit_code"]


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, (args.log_level or settings.LOG_LEVEL).upper(), logging.WARNING),
        format=settings.LOG_FORMAT,
    )
    try:
        cfg = build_run_config(args)
    except ValidationError as e:
        for err in e.errors():
            where = ".".join(str(x) for x in err["loc"]) or "arguments"
            sys.stderr.write(f"error: {where}: {err['msg']}\n")
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
