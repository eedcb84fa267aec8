import numpy as np
import pytest

from odtmotion.forward import PolarGrid
from odtmotion.phantom import default_phantom
from odtmotion.so3 import random_rotation

K0 = 2.0 * np.pi


@pytest.fixture(scope="session")
def phantom():
    return default_phantom()


@pytest.fixture(scope="session")
def grid64():
    return PolarGrid(64, K0)


@pytest.fixture(scope="session")
def grid32():
    return PolarGrid(32, K0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pair(rng, min_angle=0.05):
    """Two rotations whose third columns are at least ``min_angle`` away from (anti)parallel."""
    while True:
        Rs, Rt = random_rotation(rng), random_rotation(rng)
        ang = np.arccos(np.clip(Rs[:, 2] @ Rt[:, 2], -1.0, 1.0))
        if min_angle < ang < np.pi - min_angle:
            return Rs, Rt


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``record(number, title, ok, detail)``: one line per acceptance criterion,
    echoed immediately and repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number, title, ok, detail):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
