import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reiflab.domains import DomainSpec, rasterize

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def halfspace():
    # 4000 x 4000 cells, boundary on y = 0
    return rasterize(DomainSpec.halfspace(), 0.001, (-2, -2, 2, 2))


@pytest.fixture(scope="session")
def unit_ball():
    return rasterize(DomainSpec.ball(1.0), 0.001, (-1.5, -1.5, 1.5, 1.5))


@pytest.fixture(scope="session")
def coarse_ball():
    return rasterize(DomainSpec.ball(1.0), 0.005, (-1.5, -1.5, 1.5, 1.5))


@pytest.fixture(scope="session")
def koch5():
    return rasterize(DomainSpec.koch_flat(5, 5), 2e-5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fine_ball():
    # fine enough that (1/600, 0.002) certification is reachable
    return rasterize(DomainSpec.ball(1.0), 2.5e-7)


@pytest.fixture(scope="session")
def fine_halfspace():
    return rasterize(DomainSpec.halfspace(), 1e-4, (-1, -1, 1, 1))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
