import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from minidrive.scenario import make_collision_course, make_straight_road
from minidrive.vehicle import VehicleParams


@pytest.fixture(scope="session")
def params():
    return VehicleParams()


@pytest.fixture(scope="session")
def straight_scn():
    return make_straight_road()


@pytest.fixture(scope="session")
def collision_scn():
    return make_collision_course()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import acceptance_report

    if not acceptance_report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok in acceptance_report.RESULTS:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{verdict}: {criterion}")
