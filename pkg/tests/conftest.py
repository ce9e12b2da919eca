import numpy as np
import pytest
from hypothesis import settings, strategies as st

from viscosw.state import PrimitiveState

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

positive = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)
velocity = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
correlation = st.floats(min_value=-0.95, max_value=0.95, allow_nan=False)


@st.composite
def primitive_states(draw):
    """A scalar admissible primitive state."""
    h = draw(positive)
    cxx, cyy, czz = draw(positive), draw(positive), draw(positive)
    rho = draw(correlation)
    return PrimitiveState(h, draw(velocity), draw(velocity), cxx, cyy, rho * np.sqrt(cxx * cyy), czz)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Store and print the outcome of one acceptance criterion."""
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
