import numpy as np
import pytest

from turbmit import kernels
from turbmit.charts import textured_checkerboard


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def chart96():
    return textured_checkerboard(size=96, cell=12, seed=5)


def psnr(a, b, peak=1.0):
    mse = float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))
    return float("inf") if mse == 0 else 10.0 * np.log10(peak * peak / mse)


def crop_shift(big, dx, dy, size):
    """Window of ``big`` offset by integer ``(dx, dy)``: content moves by -d."""
    o = (big.shape[0] - size) // 2
    return big[o + dy : o + dy + size, o + dx : o + dx + size]


def residual_displacement(flow, tilt):
    """Displacement left in ``warp(warp(clean, tilt), flow)`` relative to ``clean``.

    The registered frame samples ``clean`` at ``x + f(x) + t(x + f(x))``.
    """
    tx = kernels.warp_bilinear(tilt.dx, flow.dx, flow.dy)
    ty = kernels.warp_bilinear(tilt.dy, flow.dx, flow.dy)
    return flow.dx + tx, flow.dy + ty


def endpoint_errors(flows, tilts, margin):
    """Mean residual and raw endpoint magnitude over the interior, per frame."""
    res, raw = [], []
    s = (slice(margin, -margin), slice(margin, -margin))
    for f, t in zip(flows, tilts):
        ex, ey = residual_displacement(f, t)
        res.append(float(np.hypot(ex, ey)[s].mean()))
        raw.append(float(t.magnitude()[s].mean()))
    return np.array(res), np.array(raw)
