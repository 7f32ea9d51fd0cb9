import numpy as np
import pytest

from exmoves.core import QuantizedVideo, Volume


def make_video(rng, dims=(20, 20, 20), n_points=500, sizes=(16,), video_id="v"):
    xyz = np.column_stack([rng.integers(0, d, size=n_points) for d in dims])
    k = rng.integers(0, len(sizes), size=n_points)
    cw = np.array([rng.integers(0, sizes[c]) for c in k], dtype=np.int64).reshape(-1)
    return QuantizedVideo(dims, sizes, np.column_stack([xyz, k, cw]), video_id)


def random_volume(rng, dims):
    origin, extent = [], []
    for d in dims:
        e = int(rng.integers(1, d + 1))
        origin.append(int(rng.integers(0, d - e + 1)))
        extent.append(e)
    return Volume(origin, extent)


def random_weights(rng, sizes, scale=3.0):
    return [rng.normal(scale=scale, size=d) for d in sizes]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance report ------------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    ok = report.passed if report.when == "call" else not report.failed
    prev = _CRITERIA.get(number, (title, True))
    _CRITERIA[number] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")
