"""
Planner Agents Package
Pipeline stages (plan, validate, graph) coordinated by the command line
"""
from .base_agent import BaseAgent, AgentCoordinator
from .planning_agent import PlanningAgent
from .validation_agent import ValidationAgent
from .graph_agent import GraphAgent

__all__ = [
    'BaseAgent',
    'AgentCoordinator',
    'PlanningAgent',
    'ValidationAgent',
    'GraphAgent',
]
