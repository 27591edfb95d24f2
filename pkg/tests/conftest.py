import sys
import numpy as np
import pytest

from slip_lds.harness import PRESETS
from slip_lds.lds import LdsParams


def random_system(rng, d, n, m, rho=None):
    """Random LDS with spectral radius ``rho`` (uniform in [0.3, 1] when None)."""
    A = rng.standard_normal((d, d))
    target = rng.uniform(0.3, 1.0) if rho is None else rho
    A *= target / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
    Lq = rng.standard_normal((d, d))
    Lr = rng.standard_normal((m, m))
    return LdsParams(
        A=A,
        B=rng.standard_normal((d, n)),
        C=rng.standard_normal((m, d)),
        D=rng.standard_normal((m, n)),
        Q=Lq @ Lq.T / d,
        R=Lr @ Lr.T / m + 0.1 * np.eye(m),
    )


@pytest.fixture
def sys1():
    return PRESETS["fig2-system1"].system


@pytest.fixture
def sys2():
    return PRESETS["fig2-system2"].system


@pytest.fixture
def sys3():
    return PRESETS["fig2-system3"].system


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
