"""
Shared fixtures: the bundled depots domain and its example problems
"""
import os
from pathlib import Path

import pytest

from config import settings
from models.core_model import Proposition
from models.pddl_parser import load_task

FIXTURES = settings.FIXTURES_DIR / "depots"
DOMAIN = FIXTURES / "domain.pddl"

# exhaustive property runs are opt-in
FULL_PROPERTY = os.getenv("LMPLAN_FULL_PROPERTY", "0") not in ("", "0", "false", "no")


def P(text: str) -> Proposition:
    """``P("at T0 D0")`` -> the proposition (at T0 D0)"""
    return Proposition.parse(f"({text})")


def problem_path(name: str) -> Path:
    return FIXTURES / f"{name}.pddl"


def depots_task(name: str, **kwargs):
    return load_task(DOMAIN, problem_path(name), **kwargs)


def property_count(default: int, full: int) -> int:
    return full if FULL_PROPERTY else default


@pytest.fixture(scope="session")
def domain_text() -> str:
    return DOMAIN.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def problem_text():
    return lambda name: problem_path(name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def task20():
    return depots_task("within-20")


@pytest.fixture(scope="session")
def task25():
    return depots_task("within-25")


@pytest.fixture(scope="session")
def task40():
    return depots_task("within-40")


@pytest.fixture(scope="session")
def swap_task():
    return depots_task("swap-at-most-once")


@pytest.fixture(scope="session")
def d3_plan_text() -> str:
    return (FIXTURES / "d3-route.plan").read_text(encoding="utf-8")


