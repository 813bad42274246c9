"""
Validation Agent: executes a plan and judges its goals and trajectory constraints
"""
from pathlib import Path
from typing import Dict, Any

from models.pddl_parser import parse_plan
from models.reporting import render_validation_text, validate_plan

from .base_agent import BaseAgent, require_paths, task_from_input


class ValidationAgent(BaseAgent):
    """Agent that validates IPC plan files"""

    def __init__(self, config: Dict[str, Any]):
        super().__init__("ValidationAgent", config)

    async def _validate_input(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        base_validation = await super()._validate_input(input_data)
        if not base_validation["valid"]:
            return base_validation
        if input_data.get("plan_text") is not None:
            return require_paths(input_data, "domain_path", "problem_path")
        return require_paths(input_data, "domain_path", "problem_path", "plan_path")

    async def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        task = task_from_input(input_data)
        text = input_data.get("plan_text")
        if text is None:
            text = Path(input_data["plan_path"]).read_text(encoding="utf-8")
        plan = parse_plan(text, task)

        report = validate_plan(task, plan)
        return {
            "valid": report.valid,
            "exit_code": 0 if report.valid else 2,
            "report": report.to_dict(),
            "text": render_validation_text(report),
            "validation_report": report,
            "context_updates": {"task": task},
        }
