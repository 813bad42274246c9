"""
Graph Agent: builds the root landmarks graph and renders it before and after propagation
"""
from typing import Dict, Any

from models.reporting import render_tlg_dot, render_tlg_text, tlg_to_json
from models.search import build_root_tlg

from .base_agent import BaseAgent, require_paths, task_from_input

RENDERERS = {
    "dot": lambda tlg, title, decimal: render_tlg_dot(tlg, title, decimal),
    "text": lambda tlg, title, decimal: render_tlg_text(tlg, title, decimal),
    "json": lambda tlg, title, decimal: tlg_to_json(tlg),
}


class GraphAgent(BaseAgent):
    """Agent that exposes the temporal landmarks graph of a task"""

    def __init__(self, config: Dict[str, Any]):
        super().__init__("GraphAgent", config)
        self.output_format = config.get("output", {}).get("format", "text")
        self.decimal = config.get("output", {}).get("decimal", False)

    async def _validate_input(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        base_validation = await super()._validate_input(input_data)
        if not base_validation["valid"]:
            return base_validation
        fmt = input_data.get("format", self.output_format)
        if fmt not in RENDERERS:
            return {"valid": False, "reason": f"unsupported format: {fmt}"}
        return require_paths(input_data, "domain_path", "problem_path")

    async def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        task = task_from_input(input_data)
        root = build_root_tlg(task)
        fmt = input_data.get("format", self.output_format)
        decimal = input_data.get("decimal", self.decimal)
        render = RENDERERS[fmt]

        before = render(root.initial, "before propagation", decimal)
        after = render(root.tlg, "after propagation", decimal)
        self.logger.info(f"🕸️ Rendered {len(root.tlg)} landmarks as {fmt}")
        return {
            "consistent": bool(root.consistency),
            "exit_code": 0 if root.consistency else 2,
            "witness": None if root.consistency else root.consistency.witness,
            "before": before,
            "after": after,
            "landmarks": sorted(str(p) for p in root.landmarks.landmarks),
            "context_updates": {"task": task, "root": root},
        }
