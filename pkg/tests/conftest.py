import pytest

from curlcurl.fields import Potential, power_nonlinearity
from curlcurl.grid import build_grid
from curlcurl.nehari import SolverConfig, ground_state_solve

CRITERIA: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])


def _solve(L, n):
    g = build_grid(L, L, n, n)
    V = Potential.constant(g, 1.0)
    f = power_nonlinearity(3.0)
    return ground_state_solve(SolverConfig(g, V, f))


@pytest.fixture(scope="session")
def solved_129():
    """p = 3, Gamma = 1, V = 1 on 129^2 with rmax = zmax = 12."""
    return _solve(12.0, 129)


@pytest.fixture(scope="session")
def solved_257():
    """The same problem on 257^2 with rmax = zmax = 16."""
    return _solve(16.0, 257)
