import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from movingpoint.grid import GridSpec

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid8():
    return GridSpec(8, 10.0)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32, 20.0)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64, 20.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
