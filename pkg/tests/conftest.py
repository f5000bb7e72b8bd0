import math

import numpy as np
import pytest

from dgp_pursuit.geometry import Pose


def random_pose(rng, scale=1.0, max_angle=math.pi):
    return Pose(rng.normal(scale=scale, size=3), rng.uniform(-max_angle, max_angle))


def pose_close(a, b, tol=1e-12):
    return np.allclose(a.matrix(), b.matrix(), atol=tol, rtol=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects ``{criterion: [(check, passed, detail), ...]}`` for the summary."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[num]
        ok = all(passed for _, passed, _ in checks)
        detail = "; ".join(f"{name}: {'ok' if passed else 'FAIL'} ({info})" for name, passed, info in checks)
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
