import os
from functools import lru_cache

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@lru_cache(maxsize=None)
def run_builtin(name: str, horizon):
    from ideflow import EngineConfig, builtin, simulate
    return simulate(builtin(name), EngineConfig(horizon))


@pytest.fixture(scope="session")
def fig2_report():
    return run_builtin("fig2", 3)


@pytest.fixture(scope="session")
def example3_report():
    return run_builtin("example3", 20)


CRITERIA: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    """Log one acceptance line, print it, and fail the calling test if needed."""
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    CRITERIA[number] = line
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
