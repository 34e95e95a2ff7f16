import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from indexlab import tolerances

settings.register_profile(
    "indexlab",
    max_examples=30,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("indexlab")


@pytest.fixture(autouse=True)
def _fresh_tolerances():
    tolerances.reset()
    yield
    tolerances.reset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        def order(line):
            label = line.split()[1]
            digits = label.rstrip("ab")
            return int(digits), label[len(digits):]

        for line in sorted(ACCEPTANCE_LINES, key=order):
            terminalreporter.write_line(line)
