"""Closed-form uplink and downlink SINR/SE with MR processing.

Every SINR has the form ``p_u a_u / (sum_v B[u, v] p_v + sigma2)``: the
numerator gain ``a_u = E^2 tr(R F^{-1} R)`` (``E`` the pilot energy) and the
coupling matrix ``B`` (coherent co-pilot interference plus noncoherent
interference, the latter including the user's own term) are fixed by the
statistics and the pilot assignment.  :class:`Coupling` holds these coefficients so that SINRs for
any power vector are a single mat-vec.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .correlation import ChannelStatistics
from .estimation import EstimationStats, copilot_mask
from .topology import SystemConfig

UL, DL = "ul", "dl"


@dataclass
class PowerAllocation:
    """Per-user data powers in mW, both shaped ``(L, K)``."""

    p_ul: np.ndarray
    p_dl: np.ndarray

    @classmethod
    def fixed(cls, config: SystemConfig) -> "PowerAllocation":
        """Full UL power per user and an equal split of each BS budget."""
        shape = (config.L, config.K)
        return cls(p_ul=np.full(shape, float(config.p_max_ul)),
                   p_dl=np.full(shape, config.p_max_dl / config.K))

    def check(self, config: SystemConfig, rtol: float = 1e-12):
        if np.any(self.p_ul < 0) or np.any(self.p_dl < 0):
            raise ValueError("powers must be nonnegative")
        if np.any(self.p_ul > config.p_max_ul * (1 + rtol)):
            raise ValueError("uplink power above the per-user budget")
        if np.any(self.p_dl.sum(axis=1) > config.p_max_dl * (1 + rtol)):
            raise ValueError("downlink power above the per-BS budget")


@dataclass
class Coupling:
    """SINR coefficients for one assignment: ``gain[l, k]`` and ``B[l, k, i, t]``."""

    gain: np.ndarray
    b_ul: np.ndarray
    b_dl: np.ndarray
    sigma2_ul: float
    sigma2_dl: float

    def matrix(self, direction: str) -> np.ndarray:
        L, K = self.gain.shape
        b = self.b_ul if direction == UL else self.b_dl
        return b.reshape(L * K, L * K)

    def noise(self, direction: str) -> float:
        return self.sigma2_ul if direction == UL else self.sigma2_dl

    def sinr(self, direction: str, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        shape = p.shape
        flat = p.reshape(*shape[:-2], -1)
        denom = flat @ self.matrix(direction).T + self.noise(direction)
        out = flat * self.gain.ravel() / denom
        return out.reshape(shape)


def cross_traces(stats: ChannelStatistics, est: EstimationStats):
    """``T1[l,k,i,t] = tr(R_it^l F_lk^-1 R_lk^l)`` and ``T2 = tr(R_it^l R F^-1 R)``."""
    T1 = np.einsum("itlmn,lknm->lkit", stats.R, est.A)
    C = est.Phi / stats.pilot_energy ** 2
    T2 = np.einsum("itlmn,lknm->lkit", stats.R, C).real
    return T1, T2


def coupling(stats: ChannelStatistics, est: EstimationStats, pilots) -> Coupling:
    L, K, _ = stats.shape
    e2 = stats.pilot_energy ** 2
    T1, T2 = cross_traces(stats, est)
    tr_c = est.trace_rfr
    coherent = copilot_mask(pilots).astype(float)
    coherent.reshape(L * K, L * K)[np.diag_indices(L * K)] = 0.0
    inv = np.divide(1.0, tr_c, out=np.zeros_like(tr_c), where=tr_c > 0)
    # UL: normalized by the victim's own estimate, DL: by the interferer's precoder
    b_ul = (coherent * e2 * np.abs(T1) ** 2 + T2) * inv[:, :, None, None]
    T1t = T1.transpose(2, 3, 0, 1)
    T2t = T2.transpose(2, 3, 0, 1)
    b_dl = (coherent * e2 * np.abs(T1t) ** 2 + T2t) * inv[None, None, :, :]
    return Coupling(gain=e2 * tr_c, b_ul=b_ul, b_dl=b_dl,
                    sigma2_ul=stats.sigma2_ul, sigma2_dl=stats.sigma2_dl)


def ul_sinr(l: int, k: int, stats: ChannelStatistics, est: EstimationStats, pilots,
            powers: PowerAllocation) -> float:
    """Uplink SINR of user (l, k) with MR combining."""
    return float(coupling(stats, est, pilots).sinr(UL, powers.p_ul)[l, k])


def dl_sinr(l: int, k: int, stats: ChannelStatistics, est: EstimationStats, pilots,
            powers: PowerAllocation) -> float:
    """Downlink SINR of user (l, k) with normalized MR precoding."""
    return float(coupling(stats, est, pilots).sinr(DL, powers.p_dl)[l, k])


def prelog(direction: str, config: SystemConfig) -> float:
    frac = config.gamma_ul if direction == UL else config.gamma_dl
    return frac * (1.0 - config.tau_p / config.tau_c)


def se_from_sinr(sinr, direction: str, config: SystemConfig):
    """Ergodic SE in b/s/Hz: ``gamma (1 - tau_p/tau_c) log2(1 + sinr)``."""
    return prelog(direction, config) * np.log2(1.0 + np.asarray(sinr, dtype=float))


@dataclass
class SEReport:
    """Per-user SINR and SE for one assignment and power allocation."""

    pilots: np.ndarray
    sinr_ul: np.ndarray
    sinr_dl: np.ndarray
    se_ul: np.ndarray
    se_dl: np.ndarray
    f: np.ndarray
    min_f: float

    def to_csv(self) -> str:
        """One row per user; pilots are written 1-based."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cell", "user", "pilot", "sinr_ul", "sinr_dl", "se_ul", "se_dl", "f"])
        L, K = self.f.shape
        for l in range(L):
            for k in range(K):
                writer.writerow([l + 1, k + 1, int(self.pilots[l, k]) + 1]
                                + [repr(float(x[l, k])) for x in
                                   (self.sinr_ul, self.sinr_dl, self.se_ul, self.se_dl, self.f)])
        return buf.getvalue()


def weighted_sum_se(l: int, k: int, report: SEReport) -> float:
    return float(report.f[l, k])


def network_min(report: SEReport) -> float:
    return float(report.f.min())


def evaluate(stats: ChannelStatistics, est: EstimationStats, pilots, powers: PowerAllocation,
             config: SystemConfig, w_ul=None, w_dl=None) -> SEReport:
    """Full :class:`SEReport`; weights default to those of ``config``."""
    c = coupling(stats, est, pilots)
    return report_from_coupling(c, pilots, powers, config, w_ul, w_dl)


def report_from_coupling(c: Coupling, pilots, powers: PowerAllocation, config: SystemConfig,
                         w_ul=None, w_dl=None) -> SEReport:
    w_ul = config.weights_ul if w_ul is None else np.asarray(w_ul, dtype=float)
    w_dl = config.weights_dl if w_dl is None else np.asarray(w_dl, dtype=float)
    s_ul = c.sinr(UL, powers.p_ul)
    s_dl = c.sinr(DL, powers.p_dl)
    se_ul = se_from_sinr(s_ul, UL, config)
    se_dl = se_from_sinr(s_dl, DL, config)
    f = w_ul * se_ul + w_dl * se_dl
    return SEReport(pilots=np.asarray(pilots).copy(), sinr_ul=s_ul, sinr_dl=s_dl,
                    se_ul=se_ul, se_dl=se_dl, f=f, min_f=float(f.min()))
