"""MMSE channel-estimation statistics under a pilot reuse pattern.

Pilots are integer indices ``0 .. tau_p-1`` stored in an ``(L, K)`` array.
Orthogonal pilots of length ``tau_p`` make every closed form depend only on
the pilot energy ``E = ||psi||^2`` (``tau_p`` times the pilot symbol power)
and on which users share a pilot, so pilot vectors are never built
explicitly.  With unit pilot power ``E = tau_p``.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .correlation import ChannelStatistics

COND_LIMIT = 1e12


class IllConditionedError(LinAlgError):
    """The pilot-signal covariance ``F`` is numerically singular."""


class AssignmentError(ValueError):
    """A pilot assignment violates the within-cell orthogonality contract."""


def check_assignment(pilots, L: int, K: int, tau_p: int) -> np.ndarray:
    """Validate an ``(L, K)`` pilot array and return it as ``int`` ndarray."""
    pilots = np.asarray(pilots)
    if pilots.shape != (L, K):
        raise AssignmentError(f"expected shape ({L}, {K}), got {pilots.shape}")
    if not np.issubdtype(pilots.dtype, np.integer):
        raise AssignmentError("pilot indices must be integers")
    if pilots.min() < 0 or pilots.max() >= tau_p:
        raise AssignmentError(f"pilot indices must lie in [0, {tau_p})")
    for l in range(L):
        if len(set(pilots[l].tolist())) != K:
            raise AssignmentError(f"cell {l} reuses a pilot internally")
    return pilots.astype(int)


def copilot_mask(pilots) -> np.ndarray:
    """``mask[l, k, i, t]`` is True when users (l, k) and (i, t) share a pilot."""
    pilots = np.asarray(pilots)
    return pilots[:, :, None, None] == pilots[None, None, :, :]


def copilots(l: int, k: int, pilots) -> tuple:
    """Users (including (l, k) itself) sharing the pilot of (l, k), in index order."""
    pilots = np.asarray(pilots)
    ii, tt = np.nonzero(pilots == pilots[l, k])
    return tuple(zip(ii.tolist(), tt.tolist()))


def f_matrix(l: int, k: int, stats: ChannelStatistics, pilots) -> np.ndarray:
    """Covariance of the despread pilot signal of user (l, k) at BS ``l``.

    Co-pilot users contribute ``E^2 R`` and noise contributes
    ``sigma2_ul * E * I``, with ``E`` the pilot energy.
    """
    L, K, M = stats.shape
    energy = stats.pilot_energy
    group = copilots(l, k, pilots)
    ii, tt = zip(*group)
    F = energy ** 2 * stats.R[list(ii), list(tt), l].sum(axis=0)
    return F + stats.sigma2_ul * energy * np.eye(M)


def _factor(F: np.ndarray, sigma2: float, energy: float):
    # lambda_min(F) >= sigma2*E and lambda_max(F) <= tr(F): cheap bound first
    floor = sigma2 * energy
    trace = float(np.trace(F).real)
    if floor <= 0 or trace / floor > COND_LIMIT:
        eig = np.linalg.eigvalsh(F)
        if eig[0] <= 0 or eig[-1] / eig[0] > COND_LIMIT:
            raise IllConditionedError("pilot covariance F is ill-conditioned")
    try:
        return cho_factor(F, lower=True)
    except LinAlgError as exc:
        raise IllConditionedError("pilot covariance F is not positive definite") from exc


def estimate_covariance(l: int, k: int, stats: ChannelStatistics, pilots) -> np.ndarray:
    """Covariance ``E^2 R F^{-1} R`` of the MMSE estimate of user (l, k)."""
    R = stats.R[l, k, l]
    F = f_matrix(l, k, stats, pilots)
    C = R @ cho_solve(_factor(F, stats.sigma2_ul, stats.pilot_energy), R)
    Phi = stats.pilot_energy ** 2 * C
    return (Phi + Phi.conj().T) / 2


def nmse(l: int, k: int, stats: ChannelStatistics, pilots) -> float:
    """Normalized MSE ``1 - tr(Phi) / tr(R)`` of the estimate of user (l, k)."""
    Phi = estimate_covariance(l, k, stats, pilots)
    R = stats.R[l, k, l]
    return float(1.0 - np.trace(Phi).real / np.trace(R).real)


@dataclass
class EstimationStats:
    """Per-user estimation quantities for one pilot assignment.

    ``A[l, k] = F[l, k]^{-1} R[l, k, l]`` and ``trace_rfr[l, k] =
    tr(R F^{-1} R)``; ``Phi = E^2 R F^{-1} R`` with ``E`` the pilot energy.
    """

    F: np.ndarray
    A: np.ndarray
    Phi: np.ndarray
    trace_rfr: np.ndarray
    nmse: np.ndarray


class Estimator:
    """Computes :class:`EstimationStats`, reusing per-user factorizations.

    A user's ``F`` only depends on its co-pilot set, so results are cached
    under ``(l, k, co-pilot set)``; a user whose co-pilots change simply
    misses the cache.  The cache is not shared between processes: parallel
    workers each build their own estimator.
    """

    def __init__(self, stats: ChannelStatistics, max_entries: int = 8192):
        self.stats = stats
        self.max_entries = max_entries
        self._cache = OrderedDict()
        self.hits = 0
        self.misses = 0

    def _user(self, l: int, k: int, group: tuple):
        key = (l, k, group)
        entry = self._cache.get(key)
        if entry is not None:
            self._cache.move_to_end(key)
            self.hits += 1
            return entry
        self.misses += 1
        stats = self.stats
        M = stats.R.shape[-1]
        ii, tt = zip(*group)
        energy = stats.pilot_energy
        F = energy ** 2 * stats.R[list(ii), list(tt), l].sum(axis=0)
        F = F + stats.sigma2_ul * energy * np.eye(M)
        R = stats.R[l, k, l]
        A = cho_solve(_factor(F, stats.sigma2_ul, energy), R)
        C = R @ A
        entry = (F, A, (C + C.conj().T) / 2)
        self._cache[key] = entry
        if len(self._cache) > self.max_entries:
            self._cache.popitem(last=False)
        return entry

    def __call__(self, pilots) -> EstimationStats:
        stats = self.stats
        L, K, M = stats.shape
        pilots = check_assignment(pilots, L, K, stats.tau_p)
        F = np.empty((L, K, M, M), dtype=complex)
        A = np.empty_like(F)
        C = np.empty_like(F)
        groups = {}
        for l in range(L):
            for k in range(K):
                p = pilots[l, k]
                if p not in groups:
                    groups[p] = copilots(l, k, pilots)
                F[l, k], A[l, k], C[l, k] = self._user(l, k, groups[p])
        tr_c = np.trace(C, axis1=-2, axis2=-1).real
        tr_r = np.trace(stats.R[np.arange(L)[:, None], np.arange(K)[None, :],
                                np.arange(L)[:, None]], axis1=-2, axis2=-1).real
        Phi = stats.pilot_energy ** 2 * C
        g = 1.0 - stats.pilot_energy ** 2 * tr_c / tr_r
        return EstimationStats(F=F, A=A, Phi=Phi, trace_rfr=tr_c, nmse=np.clip(g, 0.0, 1.0))


def estimation_stats(stats: ChannelStatistics, pilots) -> EstimationStats:
    """One-shot, uncached :class:`EstimationStats`."""
    return Estimator(stats)(pilots)
