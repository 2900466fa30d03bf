"""Independent reference computations used as test oracles.

These are deliberately naive: explicit pilot vectors, explicit inverses and
plain loops over every user, with no caching and no shared code paths with
the library beyond the input statistics.
"""

import numpy as np


def pilot_book(tau_p, pilot_power=1.0):
    """Orthogonal pilots as DFT columns with ``||psi||^2 = tau_p * pilot_power``."""
    n = np.arange(tau_p)
    return np.sqrt(pilot_power) * np.exp(-2j * np.pi * np.outer(n, n) / tau_p)


def literal_f(l, k, stats, pilots):
    L, K, _, M, _ = stats.R.shape
    book = pilot_book(stats.tau_p, stats.pilot_power)
    psi = book[:, pilots[l][k]]
    F = stats.sigma2_ul * np.vdot(psi, psi).real * np.eye(M, dtype=complex)
    for i in range(L):
        for t in range(K):
            F = F + abs(np.vdot(psi, book[:, pilots[i][t]])) ** 2 * stats.R[i, t, l]
    return F


def _pieces(stats, pilots):
    L, K, _, M, _ = stats.R.shape
    book = pilot_book(stats.tau_p, stats.pilot_power)
    Finv = {}
    for l in range(L):
        for k in range(K):
            Finv[l, k] = np.linalg.inv(literal_f(l, k, stats, pilots))
    return book, Finv


def literal_ul_sinr(stats, pilots, p_ul):
    L, K, _, M, _ = stats.R.shape
    book, Finv = _pieces(stats, pilots)
    out = np.zeros((L, K))
    for l in range(L):
        for k in range(K):
            psi = book[:, pilots[l][k]]
            e = np.vdot(psi, psi).real
            Rlk = stats.R[l, k, l]
            base = np.trace(Rlk @ Finv[l, k] @ Rlk).real
            coherent = noncoherent = 0.0
            for i in range(L):
                for t in range(K):
                    Rit = stats.R[i, t, l]
                    if (i, t) != (l, k):
                        overlap = abs(np.vdot(psi, book[:, pilots[i][t]])) ** 2
                        coherent += p_ul[i][t] * overlap * abs(np.trace(Rit @ Finv[l, k] @ Rlk)) ** 2 / base
                    noncoherent += p_ul[i][t] * np.trace(Rit @ Rlk @ Finv[l, k] @ Rlk).real / base
            out[l, k] = p_ul[l][k] * e ** 2 * base / (coherent + noncoherent + stats.sigma2_ul)
    return out


def literal_dl_sinr(stats, pilots, p_dl):
    L, K, _, M, _ = stats.R.shape
    book, Finv = _pieces(stats, pilots)
    out = np.zeros((L, K))
    for l in range(L):
        for k in range(K):
            psi = book[:, pilots[l][k]]
            e = np.vdot(psi, psi).real
            Rlk = stats.R[l, k, l]
            base = np.trace(Rlk @ Finv[l, k] @ Rlk).real
            coherent = noncoherent = 0.0
            for i in range(L):
                for t in range(K):
                    Rii = stats.R[i, t, i]
                    Rx = stats.R[l, k, i]
                    norm = np.trace(Rii @ Finv[i, t] @ Rii).real
                    if (i, t) != (l, k):
                        overlap = abs(np.vdot(book[:, pilots[i][t]], psi)) ** 2
                        coherent += p_dl[i][t] * overlap * abs(np.trace(Rx @ Finv[i, t] @ Rii)) ** 2 / norm
                    noncoherent += p_dl[i][t] * np.trace(Rx @ Rii @ Finv[i, t] @ Rii).real / norm
            out[l, k] = p_dl[l][k] * e ** 2 * base / (coherent + noncoherent + stats.sigma2_dl)
    return out


def grid_maxmin(c, direction, config, weights, levels=32, stages=4, floor=1e-6,
                refine_levels=None):
    """Max-min of ``w * R`` by coarse-to-fine log-spaced grid search over powers.

    Every grid point is budget-feasible, so the result never exceeds the true
    optimum.  Each stage re-centres a multiplicative window on the incumbent
    and shrinks it.  Returns ``(value, powers)``.
    """
    from mimopilot.se import UL, prelog

    L, K = c.gain.shape
    U = L * K
    pre = prelog(direction, config)
    w = np.asarray(weights, dtype=float).ravel()
    users = w > 0
    cap = config.p_max_ul if direction == UL else config.p_max_dl
    lo = np.full(U, np.log(cap * floor))
    hi = np.full(U, np.log(cap))
    best_val, best_p = -np.inf, None
    for stage in range(stages):
        n = levels if stage == 0 or refine_levels is None else refine_levels
        axes = [np.exp(np.linspace(lo[u], hi[u], n)) for u in range(U)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, U)
        p = mesh.reshape(-1, L, K)
        if direction == UL:
            ok = np.all(p <= cap * (1 + 1e-12), axis=(1, 2))
        else:
            ok = np.all(p.sum(axis=2) <= cap * (1 + 1e-12), axis=1)
        p = p[ok]
        se = w * pre * np.log2(1.0 + c.sinr(direction, p).reshape(len(p), U))
        value = se[:, users].min(axis=1)
        i = int(np.argmax(value))
        if value[i] > best_val:
            best_val, best_p = float(value[i]), p[i].copy()
        centre = np.log(best_p.ravel())
        half = (hi - lo) / (n - 1) * 2.0
        lo = np.maximum(centre - half, np.log(cap * floor))
        hi = np.minimum(centre + half, np.log(cap))
    return best_val, best_p
