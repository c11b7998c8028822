import numpy as np
import pytest

from stadapt.geom import PointPattern, SpatialWindow, TimeInterval


def uniform_pattern(n, seed=0, window=None, interval=None, margin=0.0):
    """``n`` uniform events in the unit cube (optionally shrunk by ``margin``)."""
    rng = np.random.default_rng(seed)
    window = SpatialWindow.rectangle() if window is None else window
    interval = TimeInterval(0.0, 1.0) if interval is None else interval
    xyt = margin + (1 - 2 * margin) * rng.random((n, 3))
    return PointPattern(xyt, window, interval)


def rel_sup(a, b):
    scale = max(np.abs(b).max(), 1e-300)
    return float(np.abs(a - b).max() / scale)


@pytest.fixture
def unit_window():
    return SpatialWindow.rectangle()


@pytest.fixture
def unit_interval():
    return TimeInterval(0.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
