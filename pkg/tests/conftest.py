from __future__ import annotations

import numpy as np
import pytest

from asynccd.harness.generators import gen_lasso, gen_random_quadratic
from asynccd.objective import ProblemInstance, Regularizer, SmoothPart


@pytest.fixture(scope="session")
def quad_small():
    return gen_random_quadratic(30, 5, 0.1, 1.0, seed=3)


@pytest.fixture(scope="session")
def lasso_small():
    return gen_lasso(40, 25, 0.2, 0.1, seed=1)


@pytest.fixture(scope="session")
def mixed_small():
    """Quadratic smooth part with all four regularizer kinds cycled over coordinates."""
    base = gen_random_quadratic(24, 3, 0.2, 1.0, seed=5)
    kinds = [Regularizer.zero(), Regularizer.l1(0.2), Regularizer.squared_l2(0.5), Regularizer.hinge(0.3)]
    regs = tuple(kinds[j % 4] for j in range(base.n))
    return base.replace(regs=regs, mu_F=None, f_star=None)


def two_by_two(regs=None, b=None):
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    return ProblemInstance(SmoothPart.quadratic(A, b), regs or ())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
