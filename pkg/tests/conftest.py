import math

import numpy as np
import pytest

from qpplasmon.geometry import make_circle, make_ellipse
from qpplasmon.spectrum import decompose

ALPHA = (math.pi / 2, math.pi / 3)
CENTER = (0.5, 0.5)


@pytest.fixture(scope="session")
def alpha():
    return ALPHA


@pytest.fixture(scope="session")
def circle64():
    return make_circle(CENTER, 0.2, 64)


@pytest.fixture(scope="session")
def circle128():
    return make_circle(CENTER, 0.2, 128)


@pytest.fixture(scope="session")
def ellipse128():
    return make_ellipse(CENTER, (0.3, 0.15), 128)


@pytest.fixture(scope="session")
def circle_decomp(circle128):
    return decompose(ALPHA, circle128)


@pytest.fixture(scope="session")
def ellipse_decomp(ellipse128):
    return decompose(ALPHA, ellipse128)


def smooth_density(curve, seed=0):
    """A smooth complex test density made of a few low Fourier modes."""
    rng = np.random.default_rng(seed)
    t = curve.param
    out = np.zeros(curve.n, dtype=complex)
    for m in range(4):
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        out += c[0] * np.cos(m * t) + c[1] * np.sin(m * t)
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
