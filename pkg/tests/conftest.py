import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def brute_directed(X, Y):
    """max over x of min over y, by explicit loops."""
    return max(min(math.hypot(x[0] - y[0], x[1] - y[1]) for y in Y) for x in X)


def brute_mean_nearest(X, Y):
    return sum(min(math.hypot(x[0] - y[0], x[1] - y[1]) for y in Y) for x in X) / len(X)


def central_differences(fn, p, h=1e-5):
    out = np.empty_like(p)
    for idx in np.ndindex(p.shape):
        q = p.copy()
        q[idx] += h
        plus = fn(q)
        q[idx] -= 2 * h
        minus = fn(q)
        out[idx] = (plus - minus) / (2 * h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_report():
    def record(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
