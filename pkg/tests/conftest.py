import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from hybridsort.geometry import Box

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

coord = st.floats(min_value=-500, max_value=500, allow_nan=False, allow_infinity=False)
size = st.floats(min_value=0, max_value=300, allow_nan=False, allow_infinity=False)
pos_size = st.floats(min_value=0.5, max_value=300, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw, min_size=size):
    x, y = draw(coord), draw(coord)
    return Box(x, y, x + draw(min_size), y + draw(min_size))


def random_boxes(rng: np.random.Generator, n: int, integer: bool = False, degenerate: float = 0.02) -> np.ndarray:
    """(n, 4) boxes; a small share have zero width or height."""
    xy = rng.uniform(-50, 50, size=(n, 2))
    wh = rng.uniform(0, 60, size=(n, 2))
    if integer:
        xy = np.round(xy)
        wh = np.round(wh)
    wh[rng.random(n) < degenerate, 0] = 0.0
    wh[rng.random(n) < degenerate, 1] = 0.0
    return np.concatenate([xy, xy + wh], axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report ------------------------------------------------------------

_criteria: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    key = f"C{mark.args[0]}"
    if rep.when == "call" or rep.failed:
        prev = _criteria.get(key, ("PASS", ""))[0]
        status = "FAIL" if rep.failed or prev == "FAIL" else "PASS"
        _criteria[key] = (status, mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: int(k[1:])):
        status, title = _criteria[key]
        terminalreporter.write_line(f"{status} {key} {title}")
