import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from acdln.mesh import build_rectangle_mesh
from acdln.solver import Discretization

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def unit_mesh4():
    return build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 4, 4)


@pytest.fixture(scope="session")
def disc4(unit_mesh4):
    return Discretization(unit_mesh4)


@pytest.fixture(scope="session")
def disc2():
    return Discretization(build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 2, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Print and remember one pass/fail line, then assert the outcome."""

    def _report(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
