import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from patchtrace.patch import BezierNet, GregoryNet
from patchtrace.scene_io import load_teapot

# compiled kernels make the first example slow; never time out on that
settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def planar_net(z=0.0, size=1.0) -> BezierNet:
    """Bilinear-parameterised square in the plane ``z``: S(u, v) = (u, v, z) * size."""
    i, j = np.meshgrid(np.arange(4) / 3.0, np.arange(4) / 3.0, indexing="ij")
    return BezierNet(np.stack([i * size, j * size, np.full_like(i, z)], axis=-1))


def bump_net(height=0.5) -> BezierNet:
    net = planar_net()
    pts = net.points.copy()
    pts[1:3, 1:3, 2] = height
    return BezierNet(pts)


def twisted_gregory(offset=0.2) -> GregoryNet:
    base = bump_net().points
    pv = base[1:3, 1:3] + np.array([offset, -offset, 0.5 * offset])
    return GregoryNet(base, pv)


@pytest.fixture(scope="session")
def teapot():
    return load_teapot()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance criteria lines collected during the run."""
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
