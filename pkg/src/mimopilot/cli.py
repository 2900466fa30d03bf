"""Command line entry point: ``run``, ``validate`` and ``oracle`` subcommands.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure, 4 I/O
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import (ASSIGNERS, ExperimentConfig, emit_outputs, oracle_comparison, oracle_csv,
                      run_campaign, validate_statistics, _derive_seed)
from .assignment import random_assignment
from .correlation import build_statistics
from .se import PowerAllocation
from .topology import ConfigError, generate_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("mimopilot")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimopilot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded campaign and write CSV/JSON outputs")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--drops", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path)
    run.add_argument("--assigners", help=f"comma separated subset of {','.join(ASSIGNERS)}")
    run.add_argument("--power-control", action="store_true")
    run.add_argument("--mc-validate", type=int, metavar="N", help="MC draws for term validation")
    run.add_argument("--workers", type=int)

    val = sub.add_parser("validate", help="MC validation of the closed-form SINR terms")
    val.add_argument("--config", required=True, type=Path)
    val.add_argument("--draws", type=int, help="override mc_validation (default 100000)")
    val.add_argument("--out", type=Path)

    orc = sub.add_parser("oracle", help="exhaustive vs joint vs random on tiny instances")
    orc.add_argument("--config", required=True, type=Path)
    orc.add_argument("--out", type=Path)
    return parser


def _load(args) -> ExperimentConfig:
    try:
        exp = ExperimentConfig.load(args.config)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{args.config}: {exc}") from exc
    changes = {}
    if getattr(args, "drops", None) is not None:
        changes["n_drops"] = args.drops
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "assigners", None):
        changes["assigners"] = [a.strip() for a in args.assigners.split(",") if a.strip()]
    if getattr(args, "power_control", False):
        changes["power_control"] = True
    if getattr(args, "mc_validate", None) is not None:
        changes["mc_validation"] = args.mc_validate
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if getattr(args, "out", None) is not None:
        changes["output_dir"] = str(args.out)
    if changes:
        data = exp.to_dict()
        data.update(changes)
        exp = ExperimentConfig.from_dict(data)
    return exp


def _out_dir(exp: ExperimentConfig) -> Path:
    return Path(exp.output_dir) if exp.output_dir else Path("results")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_run(exp: ExperimentConfig) -> int:
    result = run_campaign(exp)
    for path in emit_outputs(result, _out_dir(exp)):
        print(path)
    failed = [d for d in result.drops if d.status != "ok"]
    if failed:
        log.error("%d of %d drops failed", len(failed), len(result.drops))
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_validate(exp: ExperimentConfig, draws: int | None) -> int:
    n = draws or exp.mc_validation or 100_000
    system = exp.system
    seed = _derive_seed(exp.seed, system.K, 0)
    stats = build_statistics(generate_scenario(system, seed))
    pilots = random_assignment(system, _derive_seed(exp.seed, system.K, 0, 1))
    report = validate_statistics(stats, pilots, PowerAllocation.fixed(system), system, seed, n)
    path = _out_dir(exp) / "mc_validation.csv"
    _write(path, report.to_csv())
    print(path)
    print(json.dumps({"max_rel_err": report.max_rel_err(), "rows": len(report.rows), "n_draws": n}))
    return EXIT_OK


def cmd_oracle(exp: ExperimentConfig) -> int:
    rows = oracle_comparison(exp)
    path = _out_dir(exp) / "oracle.csv"
    _write(path, oracle_csv(rows))
    print(path)
    print(json.dumps({"instances": len(rows), "ordered": sum(r.ordered for r in rows)}))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exp = _load(args)
        if args.command == "run":
            return cmd_run(exp)
        if args.command == "validate":
            return cmd_validate(exp, args.draws)
        return cmd_oracle(exp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # assignment or estimation contract violations surfacing from the library
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
