"""
Command-line entry points: plan, validate and tlg
"""
from .main import RunConfig, build_run_config, main

__all__ = ["RunConfig", "build_run_config", "main"]
