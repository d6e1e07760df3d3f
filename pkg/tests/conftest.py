import numpy as np
import pytest

# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(rng, dim, real=False):
    v = rng.normal(size=dim) + (0 if real else 1j * rng.normal(size=dim))
    return v / np.linalg.norm(v)
