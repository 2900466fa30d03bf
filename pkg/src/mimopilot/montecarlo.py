"""Monte Carlo channel draws used to check the closed-form statistics.

Draws come in fixed blocks of ``BLOCK`` realizations; block ``b`` is
generated from the seed sequence ``[seed, b]``, so draw number ``d`` is the
same no matter how the blocks are split among workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .correlation import ChannelStatistics
from .estimation import copilot_mask, estimation_stats, f_matrix
from .se import DL, UL, PowerAllocation, coupling, prelog

BLOCK = 1024


@dataclass
class ChannelRealization:
    """A block of draws.

    ``h[b, l, k, j]`` is the channel of user (l, k) to BS j in draw
    ``first + b``; ``pilot_noise[b, j, p]`` is the despread noise on pilot
    ``p`` at BS ``j`` normalized to unit variance per entry.
    """

    first: int
    h: np.ndarray
    pilot_noise: np.ndarray

    def __len__(self):
        return self.h.shape[0]


def correlation_factors(stats: ChannelStatistics, tol: float = 1e-10) -> np.ndarray:
    """``A`` with ``A A^H = R`` for every link, via a clipped eigendecomposition."""
    lam, V = np.linalg.eigh(stats.R)
    beta = np.trace(stats.R, axis1=-2, axis2=-1).real / stats.R.shape[-1]
    if np.any(lam < -tol * beta[..., None]):
        raise np.linalg.LinAlgError("correlation matrix is not positive semi-definite")
    return V * np.sqrt(np.clip(lam, 0.0, None))[..., None, :]


def _complex_normal(rng, shape):
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)


def draw_block(stats: ChannelStatistics, factors: np.ndarray, seed: int, block: int) -> ChannelRealization:
    rng = np.random.default_rng([seed, block])
    L, K, M = stats.shape
    z = _complex_normal(rng, (BLOCK, L, K, L, M))
    h = np.einsum("itjmn,bitjn->bitjm", factors, z)
    noise = _complex_normal(rng, (BLOCK, L, stats.tau_p, M))
    return ChannelRealization(first=block * BLOCK, h=h, pilot_noise=noise)


def sample_channels(stats: ChannelStatistics, seed: int, n_draws: int, start: int = 0,
                    workers: int = 1):
    """Yield :class:`ChannelRealization` blocks covering draws ``start .. start+n_draws-1``."""
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    factors = correlation_factors(stats)
    stop = start + n_draws
    blocks = range(start // BLOCK, (stop - 1) // BLOCK + 1)

    def make(b):
        real = draw_block(stats, factors, seed, b)
        lo = max(start - real.first, 0)
        hi = min(stop - real.first, BLOCK)
        return ChannelRealization(first=real.first + lo, h=real.h[lo:hi],
                                  pilot_noise=real.pilot_noise[lo:hi])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(make, blocks)
    else:
        for b in blocks:
            yield make(b)


def estimator_matrix(l: int, k: int, stats: ChannelStatistics, pilots) -> np.ndarray:
    """``W = E R F^{-1}`` mapping the despread pilot signal to the estimate."""
    F = f_matrix(l, k, stats, pilots)
    R = stats.R[l, k, l]
    # R F^-1 = (F^-1 R)^H for Hermitian R and F
    return stats.pilot_energy * np.linalg.solve(F, R).conj().T


def despread(l: int, p: int, real: ChannelRealization, pilots, stats: ChannelStatistics) -> np.ndarray:
    """Received pilot signal at BS ``l`` projected on pilot ``p``: ``Y_l psi_p``."""
    pilots = np.asarray(pilots)
    ii, tt = np.nonzero(pilots == p)
    y = stats.pilot_energy * real.h[:, ii, tt, l].sum(axis=1)
    return y + math.sqrt(stats.sigma2_ul * stats.pilot_energy) * real.pilot_noise[:, l, p]


def mc_estimate(l: int, k: int, real: ChannelRealization, pilots, stats: ChannelStatistics) -> np.ndarray:
    """MMSE estimate of ``h_{l,k}^l`` in every draw of ``real``, shape ``(n, M)``."""
    pilots = np.asarray(pilots)
    y = despread(l, pilots[l, k], real, pilots, stats)
    return y @ estimator_matrix(l, k, stats, pilots).T


class TermAccumulator:
    """Running sums of every expectation that appears in the SINR closed forms.

    With ``X[u, v] = hhat_u^H h_v`` (``h_v`` taken at the BS of ``u``), the UL
    terms of user ``u`` are row ``u`` and the DL terms are column ``u``.
    Coherent means of co-pilot pairs are estimated from the only term of
    ``X`` with nonzero mean, ``E h_v^H W_u^H h_v``; the dropped terms are
    products of independent zero-mean vectors.
    """

    def __init__(self, stats: ChannelStatistics, pilots):
        self.stats = stats
        self.pilots = np.asarray(pilots)
        L, K, M = stats.shape
        self.W = np.stack([np.stack([estimator_matrix(l, k, stats, pilots) for k in range(K)])
                           for l in range(L)])
        self.n = 0
        U = L * K
        self.norm = np.zeros(U)
        self.x = np.zeros((U, U), dtype=complex)
        self.x2 = np.zeros((U, U))
        self.q = np.zeros((U, U), dtype=complex)
        self.q2 = np.zeros((U, U))
        self.cov = np.zeros((U, M, M), dtype=complex)
        self.err = np.zeros(U)
        self.energy = np.zeros(U)
        self.cross = np.zeros((U, M, M), dtype=complex)

    def estimates(self, real: ChannelRealization) -> np.ndarray:
        L, K, M = self.stats.shape
        hat = np.empty((len(real), L, K, M), dtype=complex)
        for l in range(L):
            for k in range(K):
                y = despread(l, self.pilots[l, k], real, self.pilots, self.stats)
                hat[:, l, k] = y @ self.W[l, k].T
        return hat

    def add(self, real: ChannelRealization):
        L, K, M = self.stats.shape
        U = L * K
        n = len(real)
        hat = self.estimates(real)
        cells = np.arange(L)
        # own channels h_{l,k}^l
        own = real.h[:, cells[:, None], np.arange(K)[None, :], cells[:, None]]
        X = np.einsum("blkm,bitlm->blkit", hat.conj(), real.h).reshape(n, U, U)
        # Q[u, v] = E h_v^H W_u^H h_v with h_v taken at the BS of u
        Q = self.stats.pilot_energy * np.einsum("bitlm,lknm,bitln->blkit", real.h.conj(), self.W.conj(),
                                         real.h, optimize=True).reshape(n, U, U)
        e = own - hat
        self.n += n
        self.norm += (np.abs(hat) ** 2).sum(axis=-1).reshape(n, U).sum(axis=0)
        self.x += X.sum(axis=0)
        self.x2 += (np.abs(X) ** 2).sum(axis=0)
        self.q += Q.sum(axis=0)
        self.q2 += (np.abs(Q) ** 2).sum(axis=0)
        hf = hat.reshape(n, U, M)
        ef = e.reshape(n, U, M)
        self.cov += np.einsum("bum,bun->umn", hf, hf.conj())
        self.cross += np.einsum("bum,bun->umn", hf, ef.conj())
        self.err += (np.abs(ef) ** 2).sum(axis=(0, 2))
        self.energy += (np.abs(own.reshape(n, U, M)) ** 2).sum(axis=(0, 2))

    # sample moments -------------------------------------------------------
    def mean_norm(self):
        return self.norm / self.n

    def mean_x(self):
        return self.x / self.n

    def mean_x2(self):
        return self.x2 / self.n

    def coherent(self):
        """Estimate of ``|E X|^2``: the reduced-variance mean of ``Q`` for co-pilots, plain otherwise."""
        L, K, _ = self.stats.shape
        mask = copilot_mask(self.pilots).reshape(L * K, L * K)
        mean = np.where(mask, self.q / self.n, self.x / self.n)
        return np.abs(mean) ** 2

    def coherent_stderr(self):
        """Standard error of ``|mean|`` for the plain and reduced-variance means."""
        n = self.n
        L, K, _ = self.stats.shape
        mask = copilot_mask(self.pilots).reshape(L * K, L * K)
        var_x = np.maximum(self.x2 / n - np.abs(self.x / n) ** 2, 0.0)
        var_q = np.maximum(self.q2 / n - np.abs(self.q / n) ** 2, 0.0)
        return np.sqrt(np.where(mask, var_q, var_x) / n)

    def covariance(self):
        return self.cov / self.n

    def nmse(self):
        return self.err / self.energy

    def orthogonality(self):
        """``||E[hhat e^H]||_F / sqrt(E||hhat||^2 E||e||^2)`` per user."""
        n = self.n
        return np.linalg.norm(self.cross / n, axis=(1, 2)) / np.sqrt(self.norm / n * self.err / n)


def run_accumulator(stats: ChannelStatistics, pilots, seed: int, n_draws: int,
                    workers: int = 1) -> TermAccumulator:
    acc = TermAccumulator(stats, pilots)
    for real in sample_channels(stats, seed, n_draws, workers=workers):
        acc.add(real)
    return acc


def closed_form_terms(stats: ChannelStatistics, pilots):
    """Closed-form ``E||hhat||^2``, ``|E X|^2`` and ``E|X|^2`` over all user pairs."""
    L, K, _ = stats.shape
    U = L * K
    est = estimation_stats(stats, pilots)
    e2 = stats.pilot_energy ** 2
    A = est.A
    C = est.Phi / e2
    T1 = np.einsum("itlmn,lknm->lkit", stats.R, A).reshape(U, U)
    T2 = np.einsum("itlmn,lknm->lkit", stats.R, C).real.reshape(U, U)
    mask = copilot_mask(pilots).reshape(U, U)
    coherent = np.where(mask, e2 ** 2 * np.abs(T1) ** 2, 0.0)
    return e2 * est.trace_rfr.ravel(), coherent, e2 * T2 + coherent


def sinr_from_terms(norm, coherent, second, powers: PowerAllocation, stats: ChannelStatistics):
    """UL and DL SINR built from expectation terms (MC or closed form)."""
    p_ul = powers.p_ul.ravel()
    p_dl = powers.p_dl.ravel()
    sig = np.diag(coherent)
    ul = p_ul * sig / (second @ p_ul - p_ul * sig + stats.sigma2_ul * norm)
    # DL: precoder of user v is hhat_v / sqrt(E||hhat_v||^2)
    dl_sig = sig / norm
    dl_int = (second / norm[:, None]).T @ p_dl
    dl = p_dl * dl_sig / (dl_int - p_dl * dl_sig + stats.sigma2_dl)
    shape = powers.p_ul.shape
    return ul.reshape(shape), dl.reshape(shape)


@dataclass
class TermRow:
    term: str
    closed_form: float
    mc_estimate: float
    rel_err: float
    n_draws: int
    std_err: float = math.nan


@dataclass
class ValidationReport:
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["term", "closed_form", "mc_estimate", "rel_err", "n_draws", "std_err"])
        for r in self.rows:
            writer.writerow([r.term, *(repr(float(x)) for x in (r.closed_form, r.mc_estimate, r.rel_err)),
                             int(r.n_draws), repr(float(r.std_err))])
        return buf.getvalue()

    def max_rel_err(self, prefix: str = "") -> float:
        errs = [r.rel_err for r in self.rows if r.term.startswith(prefix) and not math.isnan(r.rel_err)]
        return max(errs) if errs else 0.0

    def zero_terms(self) -> list:
        return [r for r in self.rows if r.closed_form == 0.0]


def _rel(cf, mc):
    return abs(mc - cf) / abs(cf) if cf != 0 else math.nan


def mc_validate_sinr_terms(l: int, k: int, stats: ChannelStatistics, pilots, powers: PowerAllocation,
                           config, seed: int = 0, n_draws: int = 100_000,
                           acc: TermAccumulator | None = None) -> ValidationReport:
    """Compare every expectation in the SINRs of user (l, k) with its MC estimate.

    Rows are named ``ul.gain``, ``ul.coherent[i,t]``, ``ul.noncoherent[i,t]``,
    ``dl.norm[i,t]``, ``dl.coherent[i,t]``, ``dl.noncoherent[i,t]``,
    ``ul.se`` and ``dl.se``.  Terms whose closed form is exactly zero carry
    ``rel_err = nan`` and should be judged by their standard error.
    """
    if acc is None:
        acc = run_accumulator(stats, pilots, seed, n_draws)
    L, K, _ = stats.shape
    u = l * K + k
    n = acc.n
    cf_norm, cf_coh, cf_sec = closed_form_terms(stats, pilots)
    mc_norm, mc_coh, mc_sec = acc.mean_norm(), acc.coherent(), acc.mean_x2()
    se_coh = acc.coherent_stderr()
    rows = [TermRow("ul.gain", cf_norm[u], mc_norm[u], _rel(cf_norm[u], mc_norm[u]), n)]
    for v in range(L * K):
        tag = f"[{v // K},{v % K}]"
        if v != u:
            rows.append(TermRow(f"ul.coherent{tag}", cf_coh[u, v], mc_coh[u, v],
                                _rel(cf_coh[u, v], mc_coh[u, v]), n, se_coh[u, v]))
        rows.append(TermRow(f"ul.noncoherent{tag}", cf_sec[u, v], mc_sec[u, v],
                            _rel(cf_sec[u, v], mc_sec[u, v]), n))
    for v in range(L * K):
        tag = f"[{v // K},{v % K}]"
        rows.append(TermRow(f"dl.norm{tag}", cf_norm[v], mc_norm[v], _rel(cf_norm[v], mc_norm[v]), n))
        if v != u:
            rows.append(TermRow(f"dl.coherent{tag}", cf_coh[v, u], mc_coh[v, u],
                                _rel(cf_coh[v, u], mc_coh[v, u]), n, se_coh[v, u]))
        rows.append(TermRow(f"dl.noncoherent{tag}", cf_sec[v, u], mc_sec[v, u],
                            _rel(cf_sec[v, u], mc_sec[v, u]), n))

    cf_ul, cf_dl = sinr_from_terms(cf_norm, cf_coh, cf_sec, powers, stats)
    mc_ul, mc_dl = sinr_from_terms(mc_norm, mc_coh, mc_sec, powers, stats)
    for direction, cf, mc in ((UL, cf_ul, mc_ul), (DL, cf_dl, mc_dl)):
        pre = prelog(direction, config)
        a, b = pre * math.log2(1 + cf[l, k]), pre * math.log2(1 + mc[l, k])
        rows.append(TermRow(f"{direction}.se", a, b, _rel(a, b), n))
    return ValidationReport(rows)


def closed_form_sinr(stats: ChannelStatistics, pilots, powers: PowerAllocation):
    """SINRs from the SE engine, for cross-checking :func:`sinr_from_terms`."""
    c = coupling(stats, estimation_stats(stats, pilots), pilots)
    return c.sinr(UL, powers.p_ul), c.sinr(DL, powers.p_dl)
