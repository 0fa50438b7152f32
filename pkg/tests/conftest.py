import numpy as np
import pytest

from plasmodicke.geometry import NanoSphere, SystemConfig, place_pair, place_ring

# lines recorded by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sphere15():
    return NanoSphere(15.0)


@pytest.fixture(scope="session")
def azimuthal_ring(sphere15):
    return SystemConfig(sphere15, place_ring(6, 20.0, "azimuthal", sphere15, 2.77))


@pytest.fixture(scope="session")
def radial_ring(sphere15):
    return SystemConfig(sphere15, place_ring(6, 20.0, "radial", sphere15, 2.77))


@pytest.fixture(scope="session")
def polar_pair(sphere15):
    return SystemConfig(sphere15, place_pair(np.pi, 20.0, sphere15, "radial", 2.771))
