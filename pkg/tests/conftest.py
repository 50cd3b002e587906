import numpy as np
import pytest
from hypothesis import strategies as st

from seqloc.geometry import normalize


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit_quat(rng):
    return np.asarray(normalize(rng.normal(size=4)))


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
quat_components = st.tuples(finite, finite, finite, finite).filter(
    lambda q: sum(c * c for c in q) > 1e-6)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
