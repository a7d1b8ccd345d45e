from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from typeweaver import build_usage_graph, load_project

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fig1_project():
    return load_project(FIXTURES / "fig1")


@pytest.fixture(scope="session")
def fig1_graph(fig1_project):
    return build_usage_graph(fig1_project)


@pytest.fixture()
def fig1_path() -> Path:
    return FIXTURES / "fig1"
