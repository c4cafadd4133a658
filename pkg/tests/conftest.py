import math
import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")

GROUPS = ("su2", "su11")

finite = st.floats(-3.0, 3.0, allow_nan=False)
theta = st.floats(0.15, math.pi - 0.15)
rho = st.floats(0.15, 1.8)


def c1_strategy(tag):
    return theta if tag == "su2" else rho


@st.composite
def point(draw, tag):
    return (draw(c1_strategy(tag)), draw(finite), draw(finite))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Log one pass/fail line for an acceptance criterion."""

    def _record(criterion, ok, detail):
        _ACCEPTANCE[str(criterion)] = (bool(ok), detail)
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    keys = sorted(_ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k))
    for key in keys:
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>4}: {'PASS' if ok else 'FAIL'}  {detail}")
