"""Pilot assignment: the joint UL/DL fixed-point heuristic and its benchmarks.

All assigners require ``tau_p == K`` and return an ``(L, K)`` integer array
that is a permutation of ``0 .. K-1`` in every cell.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .correlation import ChannelStatistics
from .estimation import Estimator
from .se import PowerAllocation, SEReport, coupling, report_from_coupling
from .topology import SystemConfig

CONVERGED = "converged"
CAP_REACHED = "cap_reached"

EXHAUSTIVE_LIMIT = 10_000


class TooLargeError(ValueError):
    """Exhaustive search was requested on an instance with too many candidates."""


def _require_square(config: SystemConfig):
    if config.tau_p != config.K:
        raise ValueError(f"pilot assigners need tau_p == K (got tau_p={config.tau_p}, K={config.K})")


class Objective:
    """Network-minimum weighted sum SE of an assignment at fixed powers."""

    def __init__(self, stats: ChannelStatistics, config: SystemConfig, powers: PowerAllocation,
                 w_ul=None, w_dl=None, estimator: Estimator | None = None):
        self.stats = stats
        self.config = config
        self.powers = powers
        self.w_ul = config.weights_ul if w_ul is None else np.asarray(w_ul, dtype=float)
        self.w_dl = config.weights_dl if w_dl is None else np.asarray(w_dl, dtype=float)
        self.estimator = estimator if estimator is not None else Estimator(stats)
        self.evaluations = 0

    def report(self, pilots) -> tuple[SEReport, np.ndarray]:
        """SE report and per-user NMSE under ``pilots``."""
        self.evaluations += 1
        est = self.estimator(pilots)
        c = coupling(self.stats, est, pilots)
        rep = report_from_coupling(c, pilots, self.powers, self.config, self.w_ul, self.w_dl)
        return rep, est.nmse

    def __call__(self, pilots) -> float:
        return self.report(pilots)[0].min_f


def random_assignment(config: SystemConfig, seed) -> np.ndarray:
    """Independent uniform permutation of the ``K`` pilots in every cell."""
    _require_square(config)
    rng = np.random.default_rng(seed)
    return np.stack([rng.permutation(config.K) for _ in range(config.L)])


def similarity(Ru: np.ndarray, Rv: np.ndarray) -> float:
    """Normalized trace inner product ``tr(Ru Rv) / (||Ru||_F ||Rv||_F)``."""
    num = np.trace(Ru @ Rv).real
    return float(num / (np.linalg.norm(Ru) * np.linalg.norm(Rv)))


def greedy_assignment(config: SystemConfig, stats: ChannelStatistics) -> np.ndarray:
    """Covariance-similarity greedy benchmark.

    Cell 0 keeps the identity assignment.  Each later cell takes its users in
    descending order of ``tr(R)`` at their own BS and gives each the free
    pilot whose already-assigned holders (in earlier cells) have the smallest
    total similarity to it, measured at this cell's BS.  Ties go to the lower
    user or pilot index.
    """
    _require_square(config)
    L, K = config.L, config.K
    R = stats.R
    pilots = np.full((L, K), -1, dtype=int)
    pilots[0] = np.arange(K)
    for l in range(1, L):
        power = np.array([np.trace(R[l, k, l]).real for k in range(K)])
        order = sorted(range(K), key=lambda k: (-power[k], k))
        free = list(range(K))
        for k in order:
            best, best_cost = None, math.inf
            for p in free:
                holders = [(i, t) for i in range(l) for t in range(K) if pilots[i, t] == p]
                cost = sum(similarity(R[l, k, l], R[i, t, l]) for i, t in holders)
                if cost < best_cost:
                    best, best_cost = p, cost
            pilots[l, k] = best
            free.remove(best)
    return pilots


def reassign_cell(l: int, pilots, f_values, g_values) -> np.ndarray:
    """Give the r-th worst user (by ``f``) the pilot of the r-th best estimate (by ``g``).

    Sorting is ascending and stable, so ties keep user-index order.  Only
    cell ``l`` changes and it keeps the same pilot set.
    """
    pilots = np.array(pilots, copy=True)
    f_order = np.argsort(np.asarray(f_values)[l], kind="stable")
    g_order = np.argsort(np.asarray(g_values)[l], kind="stable")
    current = pilots[l].copy()
    pilots[l, f_order] = current[g_order]
    return pilots


@dataclass
class TraceRecord:
    n: int
    cell: int
    accepted: bool
    h_star: float
    variation: float


@dataclass
class AssignmentTrace:
    """Every per-cell decision of one heuristic run.

    ``variation`` is the running sum of ``|h_l(n) - h_l(n-1)|`` over the
    cells processed so far in outer iteration ``n``; the last record of an
    iteration carries the full stopping statistic.
    """

    initial_objective: float
    initial_pilots: np.ndarray
    records: list = field(default_factory=list)
    status: str = CONVERGED
    iterations: int = 0

    def accepted_objectives(self) -> list:
        """Current objective after each decision (the last accepted value)."""
        return [self.initial_objective] + [r.h_star for r in self.records]

    def per_iteration(self) -> list:
        """Objective at the end of every outer iteration, starting with iteration 0."""
        out = [self.initial_objective]
        for r in self.records:
            if len(out) <= r.n:
                out.append(r.h_star)
            else:
                out[r.n] = r.h_star
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "cell", "accepted", "h_star", "variation"])
        for r in self.records:
            writer.writerow([r.n, r.cell + 1, int(r.accepted), repr(r.h_star), repr(r.variation)])
        return buf.getvalue()


def joint_assignment(config: SystemConfig, stats: ChannelStatistics, powers: PowerAllocation,
                     w_ul=None, w_dl=None, epsilon: float = 1e-3, max_iters: int = 50,
                     initial=None, seed=None,
                     objective: Objective | None = None) -> tuple[np.ndarray, AssignmentTrace]:
    """Cell-by-cell pilot reshuffling with backtracking, run to a fixed point.

    Starts from ``initial`` (or a random assignment drawn with ``seed``).  In
    every outer iteration each cell in index order tentatively applies
    :func:`reassign_cell` using the current SEs and NMSEs; the change is kept
    only if the network-minimum weighted SE does not drop below the last
    accepted value.  Stops once the summed per-cell change of that minimum
    over one iteration is at most ``epsilon``, or after ``max_iters``
    iterations with status ``"cap_reached"``.
    """
    _require_square(config)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if objective is None:
        objective = Objective(stats, config, powers, w_ul, w_dl)
    pilots = random_assignment(config, seed) if initial is None else np.array(initial, dtype=int)

    report, g = objective.report(pilots)
    current = report.min_f
    trace = AssignmentTrace(initial_objective=current, initial_pilots=pilots.copy())
    h_prev = np.full(config.L, current)
    for n in range(1, max_iters + 1):
        h_now = np.empty(config.L)
        variation = 0.0
        for l in range(config.L):
            candidate = reassign_cell(l, pilots, report.f, g)
            accepted = False
            if not np.array_equal(candidate, pilots):
                cand_report, cand_g = objective.report(candidate)
                if cand_report.min_f >= current:
                    pilots, report, g = candidate, cand_report, cand_g
                    current = cand_report.min_f
                    accepted = True
            h_now[l] = current
            variation += abs(h_now[l] - h_prev[l])
            trace.records.append(TraceRecord(n, l, accepted, current, variation))
        trace.iterations = n
        h_prev = h_now
        if variation <= epsilon:
            trace.status = CONVERGED
            return pilots, trace
    trace.status = CAP_REACHED
    return pilots, trace


def direction_weights(config: SystemConfig, direction: str):
    ones = np.ones((config.L, config.K))
    zeros = np.zeros((config.L, config.K))
    if direction == "ul":
        return ones, zeros
    if direction == "dl":
        return zeros, ones
    raise ValueError(f"direction must be 'ul' or 'dl', got {direction!r}")


def single_direction_assignment(config: SystemConfig, stats: ChannelStatistics,
                                powers: PowerAllocation, direction: str, **kwargs):
    """:func:`joint_assignment` driven by the UL SE alone or the DL SE alone."""
    w_ul, w_dl = direction_weights(config, direction)
    return joint_assignment(config, stats, powers, w_ul=w_ul, w_dl=w_dl, **kwargs)


def exhaustive_count(config: SystemConfig) -> int:
    return math.factorial(config.K) ** (config.L - 1)


def exhaustive_assignment(config: SystemConfig, stats: ChannelStatistics, powers: PowerAllocation,
                          w_ul=None, w_dl=None, limit: int = EXHAUSTIVE_LIMIT,
                          objective: Objective | None = None) -> tuple[np.ndarray, float]:
    """Best assignment by enumeration, with cell 0 fixed to the identity.

    Relabeling pilots network-wide leaves every SINR unchanged, so fixing
    the first cell loses nothing.  Candidates are scanned in lexicographic
    order and only a strict improvement replaces the incumbent.
    """
    _require_square(config)
    count = exhaustive_count(config)
    if count > limit:
        raise TooLargeError(f"{count} candidate assignments exceed the limit of {limit}")
    if objective is None:
        objective = Objective(stats, config, powers, w_ul, w_dl)
    K = config.K
    first = np.arange(K)
    best, best_value = None, -math.inf
    for rest in itertools.product(itertools.permutations(range(K)), repeat=config.L - 1):
        pilots = np.vstack([first, *rest]) if rest else first[None, :].copy()
        value = objective(pilots)
        if value > best_value:
            best, best_value = pilots, value
    return best, best_value


def canonical(pilots) -> np.ndarray:
    """Relabel pilots so that cell 0 holds the identity assignment."""
    pilots = np.asarray(pilots)
    relabel = np.empty(pilots.shape[1], dtype=int)
    relabel[pilots[0]] = np.arange(pilots.shape[1])
    return relabel[pilots]
