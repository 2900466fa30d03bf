"""Max-min weighted SE data power control, one direction at a time.

For a fixed pilot assignment every SINR is ``p_u a_u / (B_u . p + sigma2)``.
Meeting a set of SINR targets is then a standard-interference-function
problem: iterating ``p <- I(p)`` from zero increases monotonically to the
minimal power vector meeting all targets, or blows past the budget when the
targets are infeasible.  Because feasible objective levels form an interval
``[0, xi*]``, bisection on the objective finds the global optimum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .se import DL, UL, Coupling, PowerAllocation, prelog
from .topology import SystemConfig

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NOT_CONVERGED = "not_converged"


def sinr_target(xi: float, w: float, prelog: float) -> float:
    """SINR at which ``w * prelog * log2(1 + sinr)`` equals ``xi``."""
    if w <= 0:
        raise ValueError("sinr_target needs a positive weight")
    return 2.0 ** (xi / (w * prelog)) - 1.0


@dataclass
class Feasibility:
    status: str
    powers: np.ndarray
    iterations: int
    residual: float

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def feasibility(targets, direction: str, c: Coupling, config: SystemConfig,
                max_iter: int = 1000, rtol: float = 1e-9, history: list | None = None) -> Feasibility:
    """Minimal ``(L, K)`` power vector meeting per-user SINR ``targets``.

    Jacobi fixed-point iteration of the interference function from ``p = 0``.
    Iterates never decrease, so the first iterate that breaks a budget
    (per-user cap in UL, per-BS sum in DL) proves infeasibility.
    """
    gamma = np.asarray(targets, dtype=float)
    L, K = gamma.shape
    if np.any(gamma < 0):
        raise ValueError("SINR targets must be nonnegative")
    g = gamma.ravel()
    B = c.matrix(direction)
    a = c.gain.ravel()
    self_b = np.diag(B).copy()
    cross = B - np.diag(self_b)
    sigma2 = c.noise(direction)

    p = np.zeros(L * K)
    if history is not None:
        history.append(p.reshape(L, K).copy())
    if not np.any(g > 0):
        return Feasibility(FEASIBLE, p.reshape(L, K), 0, 0.0)

    # own SINR saturates at a/b_self, independent of power
    room = a - g * self_b
    active = g > 0
    if np.any(active & (room <= 0)):
        return Feasibility(INFEASIBLE, p.reshape(L, K), 0, math.inf)
    scale = np.where(active, g / np.where(active, room, 1.0), 0.0)

    residual = math.inf
    for it in range(1, max_iter + 1):
        new = scale * (cross @ p + sigma2)
        if history is not None:
            history.append(new.reshape(L, K).copy())
        if _over_budget(new.reshape(L, K), direction, config):
            return Feasibility(INFEASIBLE, new.reshape(L, K), it, math.inf)
        residual = float(np.max(np.abs(new - p)) / max(np.max(new), np.finfo(float).tiny))
        p = new
        if residual <= rtol:
            return Feasibility(FEASIBLE, p.reshape(L, K), it, residual)
    return Feasibility(NOT_CONVERGED, p.reshape(L, K), max_iter, residual)


def _over_budget(p, direction, config, rtol=1e-12):
    if direction == UL:
        return bool(np.any(p > config.p_max_ul * (1 + rtol)))
    return bool(np.any(p.sum(axis=1) > config.p_max_dl * (1 + rtol)))


@dataclass
class PowerControlResult:
    """Outcome of one max-min solve.

    ``powers`` holds only the solved direction; the other is zero.
    ``probes`` lists every bisection probe as ``(xi, status)``.
    """

    direction: str
    powers: PowerAllocation
    xi_star: float
    iterations: int
    residual: float
    probes: list = field(default_factory=list)

    @property
    def p(self) -> np.ndarray:
        return self.powers.p_ul if self.direction == UL else self.powers.p_dl

    def to_csv(self) -> str:
        p = self.p
        L, K = p.shape
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["direction", "xi_star", "iterations", "residual"]
                        + [f"p_{l + 1}_{k + 1}" for l in range(L) for k in range(K)])
        writer.writerow([self.direction, repr(float(self.xi_star)), self.iterations, repr(float(self.residual))]
                        + [repr(float(x)) for x in p.ravel()])
        return buf.getvalue()


def maxmin_power(direction: str, c: Coupling, config: SystemConfig, weights=None,
                 tol: float = 1e-4, max_bisections: int = 200) -> PowerControlResult:
    """Maximize ``min_u w_u R_u`` over the users with ``w_u > 0`` by bisection.

    The upper end of the bracket is the largest ``w R`` any user could reach
    alone at full power.  A probe that fails to converge is treated as
    infeasible (and recorded as such), which can only make the result more
    conservative.
    """
    if direction not in (UL, DL):
        raise ValueError(f"direction must be 'ul' or 'dl', got {direction!r}")
    if weights is None:
        weights = config.weights_ul if direction == UL else config.weights_dl
    w = np.asarray(weights, dtype=float)
    users = w > 0
    if not np.any(users):
        raise ValueError("no user has a positive weight in this direction")
    pre = prelog(direction, config)
    full = config.p_max_ul if direction == UL else config.p_max_dl
    B = c.matrix(direction)
    alone = full * c.gain.ravel() / (full * np.diag(B) + c.noise(direction))
    xi_hi = float(np.max((w.ravel() * pre * np.log2(1.0 + alone))[users.ravel()]))

    def targets(xi):
        out = np.zeros_like(w)
        for idx in zip(*np.nonzero(users)):
            out[idx] = sinr_target(xi, w[idx], pre)
        return out

    lo, hi = 0.0, xi_hi
    best = np.zeros_like(w)
    probes = []
    n = 0
    while hi - lo > tol and n < max_bisections:
        n += 1
        mid = 0.5 * (lo + hi)
        res = feasibility(targets(mid), direction, c, config)
        probes.append((mid, res.status))
        if res.feasible:
            lo, best = mid, res.powers
        else:
            hi = mid

    zeros = np.zeros_like(w)
    powers = PowerAllocation(p_ul=best, p_dl=zeros) if direction == UL else \
        PowerAllocation(p_ul=zeros, p_dl=best)
    return PowerControlResult(direction=direction, powers=powers, xi_star=lo,
                              iterations=n, residual=hi - lo, probes=probes)


def weighted_se(direction: str, c: Coupling, config: SystemConfig, p, weights=None) -> np.ndarray:
    """``w * R`` for every user at powers ``p`` (one direction)."""
    if weights is None:
        weights = config.weights_ul if direction == UL else config.weights_dl
    return np.asarray(weights) * prelog(direction, config) * np.log2(1.0 + c.sinr(direction, p))
