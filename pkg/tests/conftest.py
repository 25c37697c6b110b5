import numpy as np
import pytest

from family.design import Dataset, build_design


def make_problem(n=60, p1=4, p2=None, seed=0, noise=0.5):
    """Random design with a sparse hereditary truth; ``p2=None`` means Z = X."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p1))
    Z = None if p2 is None else rng.standard_normal((n, p2))
    data = Dataset(X, np.zeros(n), Z=Z)
    design = build_design(data)
    B = np.zeros(design.shape_B)
    B[0, 0] = 0.5
    B[1, 0] = 2.0
    B[2, 0] = -1.5
    B[0, 1] = 1.0
    B[1, 1] = 1.5
    y = design.matrix() @ B.ravel() + noise * rng.standard_normal(n)
    return design, y, B


@pytest.fixture
def small_asym():
    return make_problem(n=60, p1=4, p2=3, seed=1)


@pytest.fixture
def small_sym():
    return make_problem(n=60, p1=4, seed=2)


ACCEPTANCE = []


def record(criterion, ok, detail):
    """Log one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
