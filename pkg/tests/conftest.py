import numpy as np
import pytest

from kdblockade.amplitudes import Resonance1D, find_blockade_detuning
from kdblockade.dynamics import IntegratorControls, StateVector1D, integrate, tune_cat_pulse

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> str:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_cat():
    """Step-2 ladder blocked at |12>, pulse tuned to put the peak at |8> (full carrier)."""
    res = Resonance1D(2, find_blockade_detuning(12, 2, 1))
    pulse = tune_cat_pulse(8, res, 40.0, truncation=40, mode="full-carrier")
    traj = integrate(StateVector1D.basis(0, 40), res, pulse, IntegratorControls(snapshot_every=0.5))
    return res, pulse, traj


@pytest.fixture(scope="session")
def three_cat():
    """Step-3 ladder blocked at |18>, tuned to |18> (full carrier)."""
    res = Resonance1D(3, find_blockade_detuning(18, 3, 1))
    pulse = tune_cat_pulse(18, res, 40.0, truncation=36, mode="full-carrier")
    traj = integrate(StateVector1D.basis(0, 36), res, pulse, IntegratorControls(snapshot_every=0.5))
    return res, pulse, traj


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
