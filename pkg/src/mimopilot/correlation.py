"""Exponential spatial correlation model for a uniform linear array."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .topology import NetworkScenario


@dataclass
class ChannelStatistics:
    """Correlation matrices of every user-BS link plus noise variances.

    ``R[l, k, j]`` is the ``M x M`` correlation matrix of the channel from
    user ``k`` in cell ``l`` to BS ``j``.
    """

    R: np.ndarray
    sigma2_ul: float
    sigma2_dl: float
    tau_p: int
    pilot_power: float = 1.0

    @property
    def pilot_energy(self) -> float:
        """``||psi||^2``: pilot length times per-symbol pilot power."""
        return self.tau_p * self.pilot_power

    @property
    def shape(self) -> tuple[int, int, int]:
        L, K, _, M, _ = self.R.shape
        return L, K, M

    def to_json(self) -> str:
        return json.dumps(statistics_to_dict(self))

    @classmethod
    def from_json(cls, text: str) -> "ChannelStatistics":
        return statistics_from_dict(json.loads(text))


def exp_correlation(beta: float, mu: float, theta: float, M: int) -> np.ndarray:
    """Correlation matrix with entry ``(m, n) = beta * (mu e^{j theta})^(m - n)``.

    Entries above the diagonal are the conjugates of those below it.
    """
    if not 0.0 <= mu < 1.0:
        raise ValueError(f"correlation magnitude must lie in [0, 1), got {mu}")
    if M < 1:
        raise ValueError("M must be positive")
    if not beta > 0:
        raise ValueError("beta must be positive")
    return _exp_correlation_batch(np.asarray(beta), mu, np.asarray(theta), M)


def _exp_correlation_batch(beta, mu, theta, M):
    m = np.arange(M)
    lag = m[:, None] - m[None, :]
    # mu ** |lag| avoids 0 ** negative when mu == 0
    mag = mu ** np.abs(lag).astype(float)
    phase = np.exp(1j * np.multiply.outer(theta, lag))
    R = beta[..., None, None] * mag * phase
    # exact Hermitian symmetry: mirror the lower triangle
    return np.tril(R) + np.conj(np.swapaxes(np.tril(R, -1), -1, -2))


def build_statistics(scenario: NetworkScenario) -> ChannelStatistics:
    """Correlation matrices for all ``L*K*L`` links of a scenario."""
    cfg = scenario.config
    if np.any(scenario.beta <= 0):
        raise ValueError("beta must be positive on every link")
    R = _exp_correlation_batch(scenario.beta, cfg.mu, scenario.theta, cfg.M)
    return ChannelStatistics(R=R, sigma2_ul=cfg.sigma2_ul, sigma2_dl=cfg.sigma2_dl,
                             tau_p=cfg.tau_p, pilot_power=cfg.pilot_power)


def complex_to_interleaved(a: np.ndarray) -> list:
    """Row-major nested lists whose last axis alternates real and imaginary parts."""
    a = np.asarray(a, dtype=complex)
    out = np.empty(a.shape[:-1] + (2 * a.shape[-1],))
    out[..., 0::2] = a.real
    out[..., 1::2] = a.imag
    return out.tolist()


def interleaved_to_complex(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0::2] + 1j * arr[..., 1::2]


def statistics_to_dict(stats: ChannelStatistics) -> dict:
    return {
        "R": complex_to_interleaved(stats.R),
        "sigma2_ul": stats.sigma2_ul,
        "sigma2_dl": stats.sigma2_dl,
        "tau_p": stats.tau_p,
        "pilot_power": stats.pilot_power,
    }


def statistics_from_dict(data: dict) -> ChannelStatistics:
    return ChannelStatistics(
        R=interleaved_to_complex(data["R"]),
        sigma2_ul=float(data["sigma2_ul"]),
        sigma2_dl=float(data["sigma2_dl"]),
        tau_p=int(data["tau_p"]),
        pilot_power=float(data.get("pilot_power", 1.0)),
    )
