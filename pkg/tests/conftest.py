import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from latelump.feedback import build_bounded_kernel
from latelump.plant import PAPER_PLANT, BoundaryDynamics, find_spectrum
from latelump.spectral import Window
from latelump.target import TargetDynamics, desired_boundary_unbounded_coefficient

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def plant():
    return PAPER_PLANT


@pytest.fixture(scope="session")
def target(plant):
    return TargetDynamics.from_rate((12.0, 1.0), -20.0, plant.tau)


@pytest.fixture(scope="session")
def window():
    return Window(-30.0, 200.0)


@pytest.fixture(scope="session")
def rho(plant, target):
    return desired_boundary_unbounded_coefficient(target, plant)


@pytest.fixture(scope="session")
def kernel(plant, target):
    return build_bounded_kernel(plant, target)


@pytest.fixture(scope="session")
def open_loop(plant, window):
    return find_spectrum(plant, BoundaryDynamics(0.0), window)


@pytest.fixture(scope="session")
def intermediate(plant, rho, window):
    return find_spectrum(plant, BoundaryDynamics(rho), window)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
