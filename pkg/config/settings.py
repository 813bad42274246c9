"""
Temporal landmarks planner configuration
"""
import os
from pathlib import Path
import logging

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


class Settings:
    """Application settings class"""

    def __init__(self):
        # .env values never override variables already set in the environment
        if load_dotenv(Path(os.getenv("LMPLAN_ENV_FILE", ".env"))):
            logger.info("✅ Loaded .env file")

        # Application
        self.APP_NAME = os.getenv("LMPLAN_APP_NAME", "Landmark Planner")
        self.VERSION = os.getenv("LMPLAN_VERSION", "1.0.0")

        # Logging
        self.LOG_LEVEL = os.getenv("LMPLAN_LOG_LEVEL", "WARNING")
        self.LOG_FORMAT = os.getenv("LMPLAN_LOG_FORMAT", "%(asctime)s - %(name)s - %(levelname)s - %(message)s")

        # Time
        self.EPSILON = os.getenv("LMPLAN_EPSILON")

        # Search limits (unset means the YAML file or built-in default decides)
        self.MAX_NODES = self._int("LMPLAN_MAX_NODES")
        self.MAX_SECONDS = self._float("LMPLAN_MAX_SECONDS")
        self.JOBS = self._int("LMPLAN_JOBS")

        # Output
        self.OUTPUT_FORMAT = os.getenv("LMPLAN_OUTPUT_FORMAT")

        # Files
        self.CONFIG_FILE = Path(os.getenv("LMPLAN_CONFIG_FILE", str(Path(__file__).parent / "planner_config.yaml")))
        self.FIXTURES_DIR = Path(
            os.getenv("LMPLAN_FIXTURES_DIR", str(Path(__file__).resolve().parent.parent / "data" / "fixtures"))
        )

    @staticmethod
    def _int(name: str):
        value = os.getenv(name)
        if value is None or value == "":
            return None
        try:
            return int(value)
        except ValueError:
            logger.warning(f"⚠️ Ignoring {name}={value!r}: not an integer")
            return None

    @staticmethod
    def _float(name: str):
        value = os.getenv(name)
        if value is None or value == "":
            return None
        try:
            return float(value)
        except ValueError:
            logger.warning(f"⚠️ Ignoring {name}={value!r}: not a number")
            return None


# Create global settings instance
settings = Settings()
