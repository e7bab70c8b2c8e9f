import numpy as np
import pytest

from elasticcp.functions import FunctionSample, Grid

ACCEPTANCE_LINES = []


@pytest.fixture
def grid101():
    return Grid(101)


def make(fn, T=101, domain=(0.0, 1.0), label=None):
    grid = Grid(T, *domain)
    return FunctionSample(grid, fn(grid.t), label)


def peak_dataset(centers, T=101, domain=(-6.0, 6.0)):
    grid = Grid(T, *domain)
    t = grid.original
    return [FunctionSample(grid, np.exp(-((t - a) ** 2) / 2.0), i) for i, a in enumerate(centers)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
