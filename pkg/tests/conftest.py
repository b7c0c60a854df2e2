import numpy as np
import pytest

from fracsing import MeasureSpec, ProblemSpec, assemble_operator, build_grid
from fracsing.nonlinearity import density_on

ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str = ""):
    """Stores a criterion verdict; printed at the end of the session."""
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d} {title}: {detail}")


def canonical_problem(n_cells=128, s=0.25, q=0.5, mu_profile=None, a=-1.0, b=1.0):
    grid = build_grid(a, b, n_cells)
    profile = mu_profile or {"type": "constant", "value": 1.0}
    mu = MeasureSpec("l1_density", density=density_on(grid, profile))
    return ProblemSpec(q=q, s=s, grid=grid, mu_spec=mu), assemble_operator(grid, s)


@pytest.fixture(scope="session")
def canonical128():
    return canonical_problem(128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
