import functools

import numpy as np
import pytest

from mutloc.simulation import simulate


@functools.lru_cache(maxsize=None)
def cached_simulation(N, n, sigma=0.0, seed=0):
    return simulate(N, n, sigma, seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noise_free_n1():
    return cached_simulation(1, 41, 0.0, 0)


@pytest.fixture
def noise_free_n2():
    return cached_simulation(2, 41, 0.0, 0)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
