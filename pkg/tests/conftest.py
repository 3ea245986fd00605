"""Shared fixtures: scenario documents and memoized planning runs.

Planning the same fixture from several test modules would dominate the
suite's runtime, so finished plans are cached once per session.
"""

from pathlib import Path

import pytest

from fdbackhaul import planner, scenario_io

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"

# Fixtures a fresh `plan()` must succeed on. over_demand is deliberately
# unsatisfiable and stays out.
PLANNABLE = ("single_link", "two_node", "relay_fd", "zero_demand")


def fixture_bytes(name: str) -> bytes:
    return (FIXTURE_DIR / f"{name}.json").read_bytes()


def load_scenario(name: str):
    return scenario_io.parse_scenario(fixture_bytes(name))


class _PlanCache:
    def __init__(self):
        self._done = {}

    def get(self, name: str):
        """(plan, trace) for a fixture, planned with default options."""
        if name not in self._done:
            self._done[name] = planner.plan(load_scenario(name))
        return self._done[name]


@pytest.fixture(scope="session")
def plans() -> _PlanCache:
    return _PlanCache()


@pytest.fixture
def scenario(request):
    """Indirect fixture: parametrize with a fixture name."""
    return load_scenario(request.param)
