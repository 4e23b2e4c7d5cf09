import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sphere_pair_at_distance(d: int, dist: float, rng: np.random.Generator):
    """Unit vectors v, w with |v - w| = dist exactly."""
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    z = rng.standard_normal(d)
    z -= (z @ v) * v
    z /= np.linalg.norm(z)
    angle = 2.0 * np.arcsin(dist / 2.0)
    return v, np.cos(angle) * v + np.sin(angle) * z


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
