import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from edchrom.isotherm import LangmuirParams

settings.register_profile(
    "default", deadline=None, max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@st.composite
def langmuir_params(draw, max_n=5):
    n = draw(st.integers(1, max_n))
    steps = draw(st.lists(st.floats(0.05, 3.0), min_size=n, max_size=n))
    a = np.cumsum(steps)
    b = np.array(draw(st.lists(st.floats(0.05, 5.0), min_size=n, max_size=n)))
    eps = draw(st.floats(0.2, 0.8))
    return LangmuirParams(a, b, eps)


@st.composite
def params_and_c(draw, max_n=5, c_max=10.0, positive=False):
    p = draw(langmuir_params(max_n))
    lo = 1e-3 if positive else 0.0
    c = np.array(draw(st.lists(st.floats(lo, c_max), min_size=p.n_components,
                               max_size=p.n_components)))
    return p, c


@pytest.fixture
def single():
    """a = b = 1, eps = 0.5, so eta = 1."""
    return LangmuirParams([1.0], [1.0], 0.5)


@pytest.fixture
def three():
    return LangmuirParams([4.0, 5.0, 6.0], [4.0, 5.0, 1.0], 0.5)
