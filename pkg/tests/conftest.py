from fractions import Fraction as F

import pytest

from papangelou import Measure, Space, poisson_kernel, polya_difference_kernel, polya_sum_kernel

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def X3():
    return Space(("a", "b", "c"))


def example_kernels(space=None):
    """The three linear examples with the parameters used across the suite."""
    X = space or Space(("a", "b", "c"))
    return {
        "poisson": poisson_kernel(Measure(X, (1,) * X.size)),
        "polya_sum": polya_sum_kernel(F(3, 10), Measure(X, (1,) * X.size)),
        "polya_difference": polya_difference_kernel(F(1, 2), Measure(X, (3,) * X.size)),
    }


@pytest.fixture
def examples(X3):
    return example_kernels(X3)
