import numpy as np
import pytest

from abacminres.oracle import random_admissible_operator


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny)


@pytest.fixture
def random_op(rng):
    def make(m=3, N=8, d=1, margin=0.5):
        return random_admissible_operator(rng, m, N, d, margin)

    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
