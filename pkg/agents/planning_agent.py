"""
Planning Agent: grounds a task, analyses its landmarks graph and searches for a plan
"""
from typing import Dict, Any

from models.reporting import render_result_text, result_to_dict
from models.search import solve

from .base_agent import BaseAgent, require_paths, task_from_input


class PlanningAgent(BaseAgent):
    """Agent that runs the landmark-guided search"""

    def __init__(self, config: Dict[str, Any]):
        super().__init__("PlanningAgent", config)

        search = config.get("search", {})
        self.max_nodes = search.get("max_nodes")
        self.max_seconds = search.get("max_seconds")
        self.jobs = search.get("jobs", 1)
        self.decimal = config.get("output", {}).get("decimal", False)

    async def _validate_input(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        base_validation = await super()._validate_input(input_data)
        if not base_validation["valid"]:
            return base_validation
        return require_paths(input_data, "domain_path", "problem_path")

    async def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """Solve the task; unsolvable tasks are a result, not an error"""
        task = task_from_input(input_data)
        # a graph built by an earlier stage is reused; otherwise solve builds it
        root = (input_data.get("shared_context") or {}).get("root")

        result = solve(
            task,
            max_nodes=input_data.get("max_nodes", self.max_nodes),
            max_seconds=input_data.get("max_seconds", self.max_seconds),
            jobs=input_data.get("jobs", self.jobs),
            prune=input_data.get("prune", True),
            root=root,
        )
        decimal = input_data.get("decimal", self.decimal)
        if result.solved:
            self.logger.info(f"🧭 Plan found with {len(result.plan)} steps")
        else:
            self.logger.info(f"🧭 Task unsolvable: {result.witness}")
        return {
            "status": "solved" if result.solved else "unsolvable",
            "exit_code": 0 if result.solved else 2,
            "plan": result.plan.to_ipc(decimal) if result.solved else None,
            "report": result_to_dict(result, decimal),
            "text": render_result_text(result, decimal),
            "search_result": result,
            "context_updates": {"task": task},
        }
