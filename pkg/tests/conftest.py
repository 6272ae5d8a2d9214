import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from onebit.model import RealInstance, complex_to_real, make_instance

DATA = Path(__file__).parent / "data"

settings.register_profile("onebit", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("onebit")

_CRITERIA_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion(request, capsys):
    """Record one PASS/FAIL line for an acceptance criterion and echo it immediately."""

    def report(label: str, passed: bool, detail: str = ""):
        line = f"{label:<6s} {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.stash[_CRITERIA_KEY].append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return report


def noiseless_instance(m_tilde, n_tilde, seed) -> RealInstance:
    """Random channel and symbols with no noise at all (sigma = 0)."""
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal((m_tilde, n_tilde)) + 1j * rng.standard_normal((m_tilde, n_tilde))) / math.sqrt(2)
    x = rng.choice([-1.0, 1.0], n_tilde) + 1j * rng.choice([-1.0, 1.0], n_tilde)
    return complex_to_real(make_instance(h, x, None, 0.0))


def tiny_instance(b_rows, sigma=1.0) -> RealInstance:
    """Instance whose B matrix is exactly ``b_rows`` (r = +1, H = B)."""
    b = np.atleast_2d(np.asarray(b_rows, dtype=float))
    return RealInstance(h=b, r=np.ones(b.shape[0]), sigma=sigma)
