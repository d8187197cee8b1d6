import numpy as np
import pytest
from hypothesis import strategies as st

from interactee.geometry import BoundingBox

coords = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
sizes = st.floats(0.5, 500, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw):
    return BoundingBox(draw(coords), draw(coords), draw(sizes), draw(sizes))


def random_box(rng, span=100.0, max_size=60.0):
    return BoundingBox(rng.uniform(-span, span), rng.uniform(-span, span),
                       rng.uniform(0.5, max_size), rng.uniform(0.5, max_size))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """List the acceptance criteria outcomes recorded by test_acceptance."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
