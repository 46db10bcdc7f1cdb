import numpy as np
import pytest

from fexpbayes.spectral import FexpParams


def random_fexp(rng, K=None, d_range=(-0.35, 0.35), scale=0.5):
    if K is None:
        K = int(rng.integers(0, 4))
    j = np.maximum(np.arange(K + 1), 1)
    theta = rng.normal(0.0, scale, K + 1) / j**1.5
    return FexpParams(float(rng.uniform(*d_range)), theta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fexp_pair(rng):
    f0 = random_fexp(rng, K=2)
    d1 = float(np.clip(f0.d + rng.uniform(-0.1, 0.1), -0.45, 0.45))
    f1 = FexpParams(d1, np.asarray(f0.theta) + rng.normal(0, 0.1, f0.K + 1))
    return f0, f1


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
