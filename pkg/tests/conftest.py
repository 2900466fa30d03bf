import numpy as np
import pytest

from mimopilot.correlation import ChannelStatistics, build_statistics
from mimopilot.topology import SystemConfig, generate_scenario


def make_stats(L=2, K=2, M=8, seed=0, **kw):
    """Statistics of one random drop together with its config."""
    config = SystemConfig(L=L, K=K, M=M, **kw)
    return config, build_statistics(generate_scenario(config, seed))


def random_stats(rng, L, K, M, tau_p=None, sigma2=1.0, pilot_power=1.0, mu=None):
    """Synthetic statistics with O(1) gains, independent of the geometry code."""
    tau_p = K if tau_p is None else tau_p
    beta = rng.uniform(0.05, 1.0, size=(L, K, L))
    theta = rng.uniform(-np.pi, np.pi, size=(L, K, L))
    mu = rng.uniform(0.0, 0.9) if mu is None else mu
    m = np.arange(M)
    lag = m[:, None] - m[None, :]
    R = np.empty((L, K, L, M, M), dtype=complex)
    for idx in np.ndindex(L, K, L):
        r = mu * np.exp(1j * theta[idx])
        for a in range(M):
            for b in range(M):
                R[idx + (a, b)] = beta[idx] * (r ** (a - b) if a >= b else np.conj(r) ** (b - a))
    return ChannelStatistics(R=R, sigma2_ul=sigma2, sigma2_dl=sigma2, tau_p=tau_p,
                             pilot_power=pilot_power)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small():
    return make_stats(L=2, K=2, M=8, seed=3)


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
