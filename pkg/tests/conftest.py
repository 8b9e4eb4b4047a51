import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from fhindex.model import BanditModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def swap_model():
    """Two states that alternate; reward 1 in state 0, 0 in state 1."""
    return BanditModel([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0], 1.0)


@pytest.fixture
def swap():
    return swap_model()


@st.composite
def small_models(draw, max_n=4, betas=(0.5, 0.9, 1.0)):
    """Models with integer-weighted rows (zeros allowed) and coarse rewards, so ties are common."""
    n = draw(st.integers(1, max_n))
    rows = []
    for _ in range(n):
        w = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
        if sum(w) == 0:
            w[draw(st.integers(0, n - 1))] = 1
        rows.append(np.array(w, dtype=float) / sum(w))
    R = draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0]) | st.floats(-1, 1, allow_nan=False),
                      min_size=n, max_size=n))
    beta = draw(st.sampled_from(betas))
    return BanditModel(np.array(rows), R, beta)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
