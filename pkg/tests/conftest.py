import itertools

import numpy as np
import pytest

from gcnplus.graph import build_csr


def random_graph(rng, n, p):
    pairs = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    return build_csr(pairs, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    return build_csr([(0, 1), (1, 2)], 3)


@pytest.fixture
def edge2():
    return build_csr([(0, 1)], 2)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
