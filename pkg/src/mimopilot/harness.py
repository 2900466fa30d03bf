"""Seeded experiment campaigns over scenario drops.

A campaign draws ``n_drops`` scenarios for every requested ``K``, runs each
enabled assigner on them, optionally applies max-min power control, and
aggregates the network-minimum weighted SE into convergence, CDF and
versus-``K`` tables.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .assignment import (EXHAUSTIVE_LIMIT, AssignmentTrace, Objective, direction_weights,
                         exhaustive_assignment, exhaustive_count, greedy_assignment,
                         joint_assignment, random_assignment)
from .correlation import build_statistics
from .estimation import Estimator
from .montecarlo import ValidationReport, mc_validate_sinr_terms, run_accumulator
from .power import PowerControlResult, maxmin_power
from .se import DL, UL, PowerAllocation, SEReport, coupling, report_from_coupling
from .topology import ConfigError, SystemConfig, generate_scenario

log = logging.getLogger(__name__)

ASSIGNERS = ("random", "greedy", "ul_only", "dl_only", "joint", "exhaustive")
DEFAULT_ASSIGNERS = ("random", "greedy", "ul_only", "dl_only", "joint")


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    n_drops: int = 1
    seed: int = 0
    assigners: list = field(default_factory=lambda: list(DEFAULT_ASSIGNERS))
    power_control: bool = False
    mc_validation: int = 0
    output_dir: str | None = None
    k_values: list | None = None
    epsilon: float = 1e-3
    max_iters: int = 50
    pc_tol: float = 1e-4
    workers: int = 1
    alternations: int = 0

    def __post_init__(self):
        if isinstance(self.system, dict):
            self.system = SystemConfig.from_dict(self.system)
        self.assigners = list(self.assigners)
        self.validate()

    def validate(self):
        if self.n_drops < 1:
            raise ConfigError("n_drops must be at least 1")
        unknown = set(self.assigners) - set(ASSIGNERS)
        if unknown:
            raise ConfigError(f"unknown assigners: {sorted(unknown)}")
        if self.mc_validation < 0:
            raise ConfigError("mc_validation is a draw count and must be >= 0")
        if self.alternations < 0:
            raise ConfigError("alternations must be >= 0")
        if self.alternations and not self.power_control:
            raise ConfigError("alternations need power_control")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for system in self.systems():
            if system.tau_p != system.K:
                raise ConfigError("campaigns need tau_p == K")
            if "exhaustive" in self.assigners and exhaustive_count(system) > EXHAUSTIVE_LIMIT:
                raise ConfigError(f"exhaustive search over {exhaustive_count(system)} assignments "
                                  f"exceeds the limit of {EXHAUSTIVE_LIMIT}")

    def systems(self) -> list:
        if not self.k_values:
            return [self.system]
        return [self.system.replace(K=int(k)) for k in self.k_values]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["system"] = self.system.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read a JSON or TOML document mirroring the field names."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".toml":
            if sys.version_info >= (3, 11):
                import tomllib
            else:
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
        return cls.from_dict(data)


@dataclass
class AssignerOutcome:
    name: str
    pilots: np.ndarray
    fixed: SEReport
    trace: AssignmentTrace | None = None
    pc_ul: PowerControlResult | None = None
    pc_dl: PowerControlResult | None = None
    controlled: SEReport | None = None
    powers: PowerAllocation | None = None

    def min_f(self, controlled: bool) -> float:
        return self.controlled.min_f if controlled else self.fixed.min_f


@dataclass
class DropResult:
    index: int
    K: int
    scenario_seed: int
    status: str = "ok"
    outcomes: dict = field(default_factory=dict)
    validation: ValidationReport | None = None


@dataclass
class CampaignResult:
    config: ExperimentConfig
    drops: list = field(default_factory=list)

    def ok_drops(self, K=None):
        return [d for d in self.drops if d.status == "ok" and (K is None or d.K == K)]

    def k_values(self) -> list:
        return sorted({d.K for d in self.drops})

    def samples(self, assigner: str, controlled: bool, K=None) -> np.ndarray:
        """Network-minimum weighted SE of every successful drop."""
        return np.array([d.outcomes[assigner].min_f(controlled) for d in self.ok_drops(K)
                         if assigner in d.outcomes])

    def mean_min_f(self, assigner: str, controlled: bool, K=None) -> float:
        s = self.samples(assigner, controlled, K)
        return float(s.mean()) if s.size else float("nan")


def _derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def run_drop(exp: ExperimentConfig, system: SystemConfig, index: int) -> DropResult:
    """One scenario drop with every enabled assigner."""
    scenario_seed = _derive_seed(exp.seed, system.K, index)
    drop = DropResult(index=index, K=system.K, scenario_seed=scenario_seed)
    try:
        scenario = generate_scenario(system, scenario_seed)
        stats = build_statistics(scenario)
        powers = PowerAllocation.fixed(system)
        estimator = Estimator(stats)
        objective = Objective(stats, system, powers, estimator=estimator)
        initial = random_assignment(system, _derive_seed(exp.seed, system.K, index, 1))
        run = dict(epsilon=exp.epsilon, max_iters=exp.max_iters, initial=initial)

        for name in exp.assigners:
            trace = None
            if name == "random":
                pilots = initial
            elif name == "greedy":
                pilots = greedy_assignment(system, stats)
            elif name == "joint":
                pilots, trace = joint_assignment(system, stats, powers, objective=objective, **run)
            elif name in ("ul_only", "dl_only"):
                w_ul, w_dl = direction_weights(system, name[:2])
                own = Objective(stats, system, powers, w_ul, w_dl, estimator=estimator)
                pilots, trace = joint_assignment(system, stats, powers, objective=own, **run)
            else:
                pilots, _ = exhaustive_assignment(system, stats, powers, objective=objective)
            fixed, _ = objective.report(pilots)
            outcome = AssignerOutcome(name=name, pilots=pilots, fixed=fixed, trace=trace)
            if exp.power_control:
                _control(outcome, stats, system, estimator, powers, exp.pc_tol)
                if name == "joint":
                    for _ in range(exp.alternations):
                        _alternate(outcome, stats, system, estimator, exp)
            drop.outcomes[name] = outcome

        if exp.mc_validation and index == 0:
            drop.validation = validate_statistics(stats, drop.outcomes[exp.assigners[0]].pilots,
                                                  powers, system, scenario_seed, exp.mc_validation)
    except Exception as exc:  # drop-level status; the campaign keeps going
        log.warning("drop %d (K=%d) failed: %s", index, system.K, exc)
        drop.status = f"error: {type(exc).__name__}: {exc}"
    return drop


def validate_statistics(stats, pilots, powers, system, seed, n_draws) -> ValidationReport:
    """MC check of every user's SINR terms, rows prefixed with ``user[l,k].``."""
    acc = run_accumulator(stats, pilots, seed, n_draws)
    rows = []
    for l in range(system.L):
        for k in range(system.K):
            for r in mc_validate_sinr_terms(l, k, stats, pilots, powers, system, acc=acc).rows:
                r.term = f"user[{l},{k}].{r.term}"
                rows.append(r)
    return ValidationReport(rows)


def _control(outcome: AssignerOutcome, stats, system, estimator, fixed_powers, tol):
    c = coupling(stats, estimator(outcome.pilots), outcome.pilots)
    p_ul, p_dl = fixed_powers.p_ul, fixed_powers.p_dl
    if np.any(system.weights_ul > 0):
        outcome.pc_ul = maxmin_power(UL, c, system, tol=tol)
        p_ul = outcome.pc_ul.powers.p_ul
    if np.any(system.weights_dl > 0):
        outcome.pc_dl = maxmin_power(DL, c, system, tol=tol)
        p_dl = outcome.pc_dl.powers.p_dl
    outcome.powers = PowerAllocation(p_ul=p_ul, p_dl=p_dl)
    outcome.controlled = report_from_coupling(c, outcome.pilots, outcome.powers, system)


def _alternate(outcome: AssignerOutcome, stats, system, estimator, exp):
    """Re-run the joint assigner at the controlled powers, then re-solve the powers.

    The new pair is kept only if it raises the network minimum.
    """
    objective = Objective(stats, system, outcome.powers, estimator=estimator)
    pilots, trace = joint_assignment(system, stats, outcome.powers, epsilon=exp.epsilon,
                                     max_iters=exp.max_iters, initial=outcome.pilots,
                                     objective=objective)
    fixed, _ = Objective(stats, system, PowerAllocation.fixed(system), estimator=estimator).report(pilots)
    trial = AssignerOutcome(name=outcome.name, pilots=pilots, fixed=fixed, trace=outcome.trace)
    _control(trial, stats, system, estimator, PowerAllocation.fixed(system), exp.pc_tol)
    if trial.controlled.min_f > outcome.controlled.min_f:
        outcome.pilots, outcome.fixed = trial.pilots, trial.fixed
        outcome.pc_ul, outcome.pc_dl = trial.pc_ul, trial.pc_dl
        outcome.controlled, outcome.powers = trial.controlled, trial.powers


def _drop_job(args):
    return run_drop(*args)


def run_campaign(exp: ExperimentConfig) -> CampaignResult:
    """Run every drop; results are ordered by ``(K, drop index)`` regardless of workers."""
    jobs = [(exp, system, d) for system in exp.systems() for d in range(exp.n_drops)]
    if exp.workers > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            drops = list(pool.map(_drop_job, jobs))
    else:
        drops = [_drop_job(job) for job in jobs]
    return CampaignResult(config=exp, drops=drops)


# output files -------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _modes(result: CampaignResult) -> list:
    return [("fixed", False), ("pc", True)] if result.config.power_control else [("fixed", False)]


def _write_csv(path: Path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def convergence_rows(result: CampaignResult) -> list:
    """Mean objective after each outer iteration, traces padded with their final value."""
    rows = []
    for K in result.k_values():
        for name in result.config.assigners:
            traces = [d.outcomes[name].trace for d in result.ok_drops(K)
                      if name in d.outcomes and d.outcomes[name].trace is not None]
            if not traces:
                continue
            curves = [t.per_iteration() for t in traces]
            n = max(len(c) for c in curves)
            padded = np.array([c + [c[-1]] * (n - len(c)) for c in curves])
            for it, value in enumerate(padded.mean(axis=0)):
                rows.append([name, K, it, _fmt(value)])
    return rows


def cdf_rows(result: CampaignResult) -> list:
    rows = []
    for K in result.k_values():
        for name in result.config.assigners:
            for mode, controlled in _modes(result):
                s = np.sort(result.samples(name, controlled, K))
                for i, x in enumerate(s):
                    rows.append([name, K, mode, _fmt(x), _fmt((i + 1) / s.size)])
    return rows


def vs_k_rows(result: CampaignResult) -> list:
    rows = []
    for name in result.config.assigners:
        for mode, controlled in _modes(result):
            for K in result.k_values():
                if result.samples(name, controlled, K).size:
                    rows.append([name, K, mode, _fmt(result.mean_min_f(name, controlled, K))])
    return rows


def summary(result: CampaignResult) -> dict:
    stats = []
    for K in result.k_values():
        for name in result.config.assigners:
            for mode, controlled in _modes(result):
                s = result.samples(name, controlled, K)
                if s.size:
                    stats.append({"assigner": name, "K": K, "power": mode, "n": int(s.size),
                                  "mean_min_f": float(s.mean()), "median_min_f": float(np.median(s)),
                                  "min_min_f": float(s.min()), "max_min_f": float(s.max())})
    return {
        "config": result.config.to_dict(),
        "aggregate": stats,
        "drops": [{"index": d.index, "K": d.K, "seed": d.scenario_seed, "status": d.status}
                  for d in result.drops],
        "versions": {"mimopilot": __version__, "numpy": np.__version__},
    }


def drop_details(result: CampaignResult) -> list:
    """Persisted assignments and powers, enough to recompute every reported minimum."""
    out = []
    for d in result.drops:
        entry = {"index": d.index, "K": d.K, "seed": d.scenario_seed, "status": d.status,
                 "assigners": {}}
        for name, o in d.outcomes.items():
            item = {"pilots": o.pilots.tolist(), "min_f_fixed": o.fixed.min_f}
            if o.trace is not None:
                item["iterations"] = o.trace.iterations
                item["trace_status"] = o.trace.status
            if o.controlled is not None:
                item.update(min_f_pc=o.controlled.min_f, p_ul=o.powers.p_ul.tolist(),
                            p_dl=o.powers.p_dl.tolist())
            entry["assigners"][name] = item
        out.append(entry)
    return out


def emit_outputs(result: CampaignResult, out_dir) -> list:
    """Write ``convergence.csv``, ``cdf.csv``, ``vs_k.csv``, ``drops.json`` and ``summary.json``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    _write_csv(out / "convergence.csv", ["assigner", "K", "iteration", "mean_min_f"],
               convergence_rows(result))
    _write_csv(out / "cdf.csv", ["assigner", "K", "power", "min_f", "cdf"], cdf_rows(result))
    _write_csv(out / "vs_k.csv", ["assigner", "K", "power", "mean_min_f"], vs_k_rows(result))
    written += [out / "convergence.csv", out / "cdf.csv", out / "vs_k.csv"]
    for path, payload in ((out / "drops.json", drop_details(result)),
                          (out / "summary.json", summary(result))):
        try:
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    reports = [d.validation for d in result.drops if d.validation is not None]
    if reports:
        path = out / "mc_validation.csv"
        try:
            path.write_text(reports[0].to_csv(), encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return [os.fspath(p) for p in written]


# tiny-instance comparison -------------------------------------------------

@dataclass
class OracleRow:
    drop: int
    seed: int
    exhaustive: float
    joint: float
    random: float
    iterations: int

    @property
    def ordered(self) -> bool:
        return self.exhaustive >= self.joint >= self.random


def oracle_comparison(exp: ExperimentConfig) -> list:
    """Exhaustive, joint and random objectives on every drop of ``exp.system``."""
    system = exp.system
    if exhaustive_count(system) > EXHAUSTIVE_LIMIT:
        raise ConfigError(f"exhaustive search over {exhaustive_count(system)} assignments "
                          f"exceeds the limit of {EXHAUSTIVE_LIMIT}")
    rows = []
    for d in range(exp.n_drops):
        seed = _derive_seed(exp.seed, system.K, d)
        stats = build_statistics(generate_scenario(system, seed))
        powers = PowerAllocation.fixed(system)
        objective = Objective(stats, system, powers)
        initial = random_assignment(system, _derive_seed(exp.seed, system.K, d, 1))
        joint, trace = joint_assignment(system, stats, powers, epsilon=exp.epsilon,
                                        max_iters=exp.max_iters, initial=initial,
                                        objective=objective)
        _, best = exhaustive_assignment(system, stats, powers, objective=objective)
        rows.append(OracleRow(drop=d, seed=seed, exhaustive=best, joint=objective(joint),
                              random=objective(initial), iterations=trace.iterations))
    return rows


def oracle_csv(rows) -> str:
    lines = ["drop,seed,exhaustive,joint,random,iterations,ordered"]
    for r in rows:
        lines.append(f"{r.drop},{r.seed},{r.exhaustive!r},{r.joint!r},{r.random!r},"
                     f"{r.iterations},{int(r.ordered)}")
    return "\n".join(lines) + "\n"
