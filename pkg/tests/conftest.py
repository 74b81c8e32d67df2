import time

import numpy as np
import pytest

SESSION_START = time.perf_counter()
ACCEPTANCE_LINES = []


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_collection_modifyitems(items):
    # acceptance runs last so criterion 8 can time the whole session
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_prob_map(rng, h, w):
    m = rng.random((h, w)) ** 3
    return m / m.sum()
