"""
Configuration package for the temporal landmarks planner
"""
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .settings import settings

logger = logging.getLogger(__name__)

__all__ = ["settings", "load_planner_config", "DEFAULT_PLANNER_CONFIG"]

# Version info
__version__ = "1.0.0"

DEFAULT_PLANNER_CONFIG: Dict[str, Dict[str, Any]] = {
    "search": {"max_nodes": 200000, "max_seconds": 300, "jobs": 1},
    "time": {"epsilon": "1/1000"},
    "output": {"format": "text", "decimal": False},
}


def load_planner_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Dict[str, Any]]:
    """
    Read the planner YAML file, section by section over the defaults.
    A missing or unreadable file falls back to the defaults.
    """
    config_path = Path(path) if path is not None else settings.CONFIG_FILE
    config = {section: dict(values) for section, values in DEFAULT_PLANNER_CONFIG.items()}
    if not config_path.exists():
        logger.warning(f"⚠️ No planner config at {config_path}, using defaults.")
        return config
    try:
        with open(config_path, "r") as f:
            loaded = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        logger.warning(f"⚠️ Could not read {config_path}: {e}; using defaults.")
        return config
    for section, values in loaded.items():
        if isinstance(values, dict):
            config.setdefault(section, {}).update(values)
        else:
            logger.warning(f"⚠️ Ignoring non-mapping section '{section}' in {config_path}")
    logger.info(f"✅ Loaded configuration from {config_path}")
    return config
