import pytest
from hypothesis import HealthCheck, settings

from metastab.dynamics import OrbitCache, load_scenario

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def rotation():
    return load_scenario("rotation")


@pytest.fixture(scope="session")
def rotation_cache(rotation):
    return OrbitCache(rotation)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
