import numpy as np
import pytest

from pc2.operators import BoundaryCondition, LinearOperator, ProblemSpec
from pc2.polybasis import VariableTransform


def poisson_problem():
    x = VariableTransform("x", "deterministic", -1.0, 1.0)
    pde = LinearOperator.make([("1", {"x": 2})], "2")
    bcs = [
        BoundaryCondition.make(LinearOperator.dirichlet("0"), {"x": -1.0}),
        BoundaryCondition.make(LinearOperator.make([("1", {"x": 1})], "4"), {"x": 1.0}),
    ]
    from pc2.expression import Expression

    return ProblemSpec((x,), pde, bcs, Expression("(x+1)^2"), name="poisson")


@pytest.fixture
def poisson():
    return poisson_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record(number: int, passed: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
