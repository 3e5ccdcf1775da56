import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mmspace import build_space, grid

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def two_point():
    return build_space([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5])


@pytest.fixture
def grid3():
    return grid(1, 3)


def random_space(rng, n, dim=2):
    """Random Euclidean point cloud with random positive weights."""
    pts = rng.random((n, dim))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    w = rng.random(n) + 0.1
    return build_space(d, w / w.sum(), coords=pts)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
