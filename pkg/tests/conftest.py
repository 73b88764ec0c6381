"""Shared fixtures: solved presets (expensive, session-scoped) and the
acceptance-line recorder printed at the end of the run."""

import numpy as np
import pytest

from hjbpass.hjb import PolicyIterConfig, policy_iteration
from hjbpass.models import LtiPhPlant, get_preset


def random_lti_ph_plant(seed: int) -> LtiPhPlant:
    """Random structured plant with controlled spectra, so the solved
    quantities stay well-conditioned across seeds (n cycles 2..4)."""
    rng = np.random.default_rng(seed)
    n = 2 + seed % 3
    m = 1 + seed % 2

    def rand_spd(lo: float, hi: float) -> np.ndarray:
        V, _ = np.linalg.qr(rng.standard_normal((n, n)))
        S = V @ np.diag(rng.uniform(lo, hi, size=n)) @ V.T
        return 0.5 * (S + S.T)

    K = rng.standard_normal((n, n))
    return LtiPhPlant(
        J=K - K.T,
        R=rand_spd(0.3, 1.5),
        Q=rand_spd(0.5, 1.5),
        Bc=rng.standard_normal((n, m)),
    )

def random_stabilizable_system(seed: int):
    """Random (A, B, C) with mildly bounded growth; generically stabilizable
    and detectable, so a stabilizing Riccati solution exists."""
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 9))
    m = int(rng.integers(1, 4))
    k = int(rng.integers(1, n + 1))
    A = rng.standard_normal((n, n))
    alpha = float(np.max(np.linalg.eigvals(A).real))
    if alpha > 0.3:
        A = A - (alpha - 0.3) * np.eye(n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((k, n))
    return A, B, C


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for one-line pass/fail verdicts, echoed after the test run."""

    def record(name: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _solve(preset_name: str):
    preset = get_preset(preset_name)
    config = PolicyIterConfig(degree=preset.degree, domain=preset.domain)
    return preset, policy_iteration(preset.plant, config)


@pytest.fixture(scope="session")
def pendulum_solved():
    """(preset, report) for the solved pendulum preset."""
    return _solve("pendulum-paper")


@pytest.fixture(scope="session")
def vdp_solved():
    """(preset, report) for the solved Van der Pol preset."""
    return _solve("vdp-paper")


@pytest.fixture(scope="session")
def lti_solved():
    """(preset, report) for the solved linear pH preset."""
    return _solve("lti-indefinite")


@pytest.fixture(scope="session")
def rng_states():
    """Deterministic state samples reused by consistency sweeps."""

    def make(seed: int, count: int, half_width: float = 2.0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.uniform(-half_width, half_width, size=(count, 2))

    return make
