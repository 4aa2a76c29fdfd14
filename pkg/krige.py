#!/usr/bin/env python3
"""
krige - kriging S-statistics from the command line

    krige.py predict  --data samples.csv --model exponential --range 1 --sigma2 1 --target 0.5,0.5
    krige.py mean     --data samples.csv --model white_noise --sigma2 1 --check
    krige.py validate --data samples.csv --model spherical --range 2 --sigma2 1
    krige.py simulate --model white_noise --sigma2 1 --n 4 --replicates 100000 --seed 7
    krige.py stats    --data samples.csv

Records go to --out (default stdout) as JSON lines. Errors go to stderr as one
JSON line each. Exit codes: 0 success, 2 user/config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REPO_ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(REPO_ROOT))

from core.config import NumericPolicy, load_budget, load_numeric_policy
from core.correlation import CorrelationKind, CorrelationModel, Location
from core.errors import ConfigError, ContractViolationError, DimensionMismatchError, KrigeError
from core.harness.montecarlo import Layout, McReport, SimulationConfig, verify_asymptotics, verify_prediction_variance
from core.ingest import ingest
from core.kriging import cross_validate, predict_many
from core.mean_gls import gls_mean, gls_mean_via_kriging, max_discrepancy, sample_variance
from core.report import JsonLinesWriter, open_output, write_error

logger = logging.getLogger("core.cli")

EXIT_OK = 0
EXIT_USER = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of printing usage and exiting."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    policy: NumericPolicy
    out: str | None = None
    verbose: bool = False
    data: str | None = None
    model: CorrelationModel | None = None
    targets: list[Location] = field(default_factory=list)
    check: bool = False
    workers: int = 1
    simulation: SimulationConfig | None = None
    schedule: list[int] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Flag parsing
# ---------------------------------------------------------------------------

def _floats(raw: str, sep: str, flag: str) -> list[float]:
    try:
        values = [float(p) for p in raw.split(sep)]
    except ValueError:
        raise ConfigError(f"{flag} expects numbers separated by '{sep}', got {raw!r}", flag=flag)
    if not all(np.isfinite(values)):
        raise ConfigError(f"{flag} values must be finite, got {raw!r}", flag=flag)
    return values


def parse_target(raw: str, flag: str = "--target") -> Location:
    coords = _floats(raw, ",", flag)
    if not 1 <= len(coords) <= 3:
        raise ConfigError(f"{flag} needs 1..3 coordinates, got {raw!r}", flag=flag)
    return Location(tuple(coords))


def parse_grid(axes: list[str]) -> list[Location]:
    """One 'min:max:steps' per axis; row-major order (the last axis varies fastest)."""
    if len(axes) > 3:
        raise ConfigError("--grid accepts at most 3 axes", flag="--grid")
    ticks = []
    for raw in axes:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--grid expects min:max:steps, got {raw!r}", flag="--grid")
        lo, hi = _floats(":".join(parts[:2]), ":", "--grid")
        try:
            steps = int(parts[2])
        except ValueError:
            raise ConfigError(f"--grid steps must be an integer, got {parts[2]!r}", flag="--grid")
        if steps < 1 or hi < lo:
            raise ConfigError(f"--grid needs steps >= 1 and max >= min, got {raw!r}", flag="--grid")
        ticks.append(np.linspace(lo, hi, steps))
    return [Location(tuple(float(c) for c in pt)) for pt in itertools.product(*ticks)]


def parse_schedule(raw: str) -> list[int]:
    try:
        schedule = [int(p) for p in raw.split(",")]
    except ValueError:
        raise ConfigError(f"--schedule expects comma-separated integers, got {raw!r}", flag="--schedule")
    if any(n < 1 for n in schedule):
        raise ConfigError("--schedule entries must be >= 1", flag="--schedule")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError("--schedule must be strictly increasing", flag="--schedule")
    return schedule


def parse_bbox(axes: list[str] | None) -> tuple[tuple[float, ...], tuple[float, ...]]:
    if not axes:
        return (0.0, 0.0), (1.0, 1.0)
    lo, hi = [], []
    for raw in axes:
        bounds = _floats(raw, ":", "--bbox")
        if len(bounds) != 2:
            raise ConfigError(f"--bbox expects min:max per axis, got {raw!r}", flag="--bbox")
        lo.append(bounds[0])
        hi.append(bounds[1])
    return tuple(lo), tuple(hi)


def _model(args) -> CorrelationModel:
    if args.sigma2 is None:
        raise ConfigError("--sigma2 is required (sigma2 is never estimated from data)", flag="--sigma2")
    if args.model != CorrelationKind.WHITE_NOISE.value and args.range is None:
        raise ConfigError(f"--range is required for the {args.model} model", flag="--range")
    return CorrelationModel(CorrelationKind(args.model), sigma2=args.sigma2, range=args.range, nugget=args.nugget)


def _positive(value: int, flag: str) -> int:
    if value < 1:
        raise ConfigError(f"{flag} must be >= 1, got {value}", flag=flag)
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default=None, metavar="PATH", help="Write JSON lines here (default: stdout)")
    common.add_argument("--verbose", action="store_true", help="Include weights/multipliers and debug logging")

    data = _Parser(add_help=False)
    data.add_argument("--data", required=True, metavar="PATH", help="CSV with header x[,y[,z]],value")

    model = _Parser(add_help=False)
    model.add_argument("--model", required=True, choices=[k.value for k in CorrelationKind])
    model.add_argument("--range", type=float, default=None, metavar="R")
    model.add_argument("--sigma2", type=float, default=None, metavar="S")
    model.add_argument("--nugget", type=float, default=0.0, metavar="G")

    parser = _Parser(prog="krige", description="Kriging S-statistics")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", parents=[common, data, model], help="Point predictions with variances")
    p.add_argument("--target", action="append", default=[], help="Target coordinates, e.g. 0.5,0.5 (repeatable)")
    p.add_argument("--grid", action="append", default=[], help="min:max:steps, one per axis (repeatable)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("mean", parents=[common, data, model], help="GLS estimate of the field mean")
    p.add_argument("--check", action="store_true", help="Cross-check through the bordered kriging system")

    p = sub.add_parser("validate", parents=[common, data, model], help="Leave-one-out cross validation")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", parents=[common, model], help="Monte Carlo verification of the variances")
    p.add_argument("--n", type=int, default=None, help="Sample count (ignored with --schedule)")
    p.add_argument("--schedule", default="", help="Comma-separated increasing sample counts")
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--layout", default=Layout.UNIT_GRID.value, choices=[l.value for l in Layout])
    p.add_argument("--bbox", action="append", default=None, help="min:max, one per axis (default unit square)")
    p.add_argument("--target", default=None, help="Target coordinates (default: off-sample point)")
    p.add_argument("--lanes", type=int, default=None, help="Parallel lanes (default: configs/budget.yaml)")

    sub.add_parser("stats", parents=[common, data], help="Biased and unbiased sample variance")
    return parser


def build_run_config(argv: list[str] | None, policy: NumericPolicy) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command, policy=policy, out=args.out, verbose=args.verbose, data=getattr(args, "data", None))
    if args.command == "stats":
        return cfg

    cfg.model = _model(args)
    if args.command == "predict":
        cfg.targets = [parse_target(t) for t in args.target] + (parse_grid(args.grid) if args.grid else [])
        if not cfg.targets:
            raise ConfigError("predict needs at least one --target or a --grid", flag="--target")
        cfg.workers = _positive(args.workers, "--workers")
    elif args.command == "mean":
        cfg.check = args.check
    elif args.command == "validate":
        cfg.workers = _positive(args.workers, "--workers")
    elif args.command == "simulate":
        cfg.schedule = parse_schedule(args.schedule) if args.schedule else []
        if not cfg.schedule and args.n is None:
            raise ConfigError("simulate needs --n or --schedule", flag="--n")
        budget = load_budget()["simulation"]
        cfg.simulation = SimulationConfig(
            seed=args.seed,
            replicates=args.replicates,
            n=cfg.schedule[0] if cfg.schedule else args.n,
            model=cfg.model,
            mean=args.mean,
            layout=Layout(args.layout),
            bbox=parse_bbox(args.bbox),
            target=parse_target(args.target) if args.target else None,
            block_size=int(budget["block_size"]),
            lanes=_positive(args.lanes if args.lanes is not None else int(budget["lanes"]), "--lanes"),
            max_draws=int(budget["max_draws"]),
        )
        cfg.simulation.require_budget()
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_predict(config: RunConfig, out: JsonLinesWriter) -> int:
    samples = ingest(config.data)
    for t in config.targets:
        if t.dimension != samples.dimension:
            raise DimensionMismatchError(samples.dimension, t.dimension, what="data and --target")
    predictions = predict_many(config.model, samples, config.targets, workers=config.workers, policy=config.policy)
    for target, pred in zip(config.targets, predictions):
        record = {
            "record": "prediction",
            "target": list(target.coords),
            "estimate": pred.estimate,
            "kriging_variance": pred.kriging_variance,
            "estimator_variance": pred.estimator_variance,
        }
        if config.verbose:
            record["weights"] = [float(w) for w in pred.solution.weights]
            record["lagrange"] = pred.solution.lagrange
            record["residual"] = pred.solution.residual
            record["condition"] = 1.0 / pred.solution.rcond
        out.write(record)
    return EXIT_OK


def cmd_mean(config: RunConfig, out: JsonLinesWriter) -> int:
    samples = ingest(config.data)
    est = gls_mean(config.model, samples, config.policy)
    record = {"record": "mean", "mean": est.mean, "xi": est.xi, "mse": est.mse, "n": est.n}
    if config.verbose:
        record["weights"] = [float(w) for w in est.weights]
        record["lagrange"] = est.lagrange
    if config.check:
        record["max_discrepancy"] = max_discrepancy(est, gls_mean_via_kriging(config.model, samples, config.policy))
    out.write(record)
    return EXIT_OK


def cmd_validate(config: RunConfig, out: JsonLinesWriter) -> int:
    samples = ingest(config.data)
    report = cross_validate(config.model, samples, workers=config.workers, policy=config.policy)
    for fold in report.folds:
        out.write({
            "record": "fold",
            "index": fold.index,
            "actual": fold.actual,
            "estimate": fold.prediction.estimate,
            "residual": fold.residual,
            "kriging_variance": fold.prediction.kriging_variance,
            "estimator_variance": fold.prediction.estimator_variance,
        })
    for skipped in report.skipped:
        out.write({"record": "skipped_fold", "index": skipped.index, "reason": skipped.reason})
    out.write({
        "record": "summary",
        "folds": len(report.folds),
        "skipped": len(report.skipped),
        "mean_squared_residual": report.mean_squared_residual,
        "mean_kriging_variance": report.mean_kriging_variance,
        "ratio": report.ratio,
    })
    return EXIT_OK


def _mc_record(report: McReport, seed: int) -> dict:
    return {
        "record": "mc_report",
        "n": report.n,
        "replicates": report.replicates,
        "empirical_mse_prediction": report.empirical_mse_prediction,
        "empirical_estimator_variance": report.empirical_estimator_variance,
        "analytic_kriging_variance": report.analytic_kriging_variance,
        "analytic_estimator_variance": report.analytic_estimator_variance,
        "standard_error": report.standard_error,
        "estimator_standard_error": report.estimator_standard_error,
        "passed_prediction": report.passed_prediction,
        "passed_estimator": report.passed_estimator,
        "passed": report.passed,
        "seed": seed,
    }


def cmd_simulate(config: RunConfig, out: JsonLinesWriter) -> int:
    sim = config.simulation
    if not config.schedule:
        out.write(_mc_record(verify_prediction_variance(sim, policy=config.policy), sim.seed))
        return EXIT_OK
    try:
        reports = verify_asymptotics(sim, config.schedule, policy=config.policy)
    except ContractViolationError as e:
        out.write_all(_mc_record(r, sim.seed) for r in getattr(e, "reports", []))
        raise
    out.write_all(_mc_record(r, sim.seed) for r in reports)
    return EXIT_OK


def cmd_stats(config: RunConfig, out: JsonLinesWriter) -> int:
    samples = ingest(config.data)
    est = sample_variance(samples.values)
    unbiased = est.unbiased if est.n > 1 else None
    out.write({"record": "stats", "n": est.n, "mean": est.mean, "biased": est.biased, "unbiased": unbiased})
    return EXIT_OK


COMMANDS = {
    "predict": cmd_predict,
    "mean": cmd_mean,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "stats": cmd_stats,
}


def _configure_logging(verbose: bool) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(name)s] %(levelname)s: %(message)s"))
    root = logging.getLogger("core")
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
    return handler


def main(argv: list[str] | None = None) -> int:
    try:
        policy = load_numeric_policy()
        config = build_run_config(argv, policy)
    except KrigeError as e:
        write_error(e.to_dict())
        return EXIT_USER

    handler = _configure_logging(config.verbose)
    logger.debug("%s with policy %s", config.command, config.policy)
    stream = None
    try:
        stream = open_output(config.out)
        writer = JsonLinesWriter(stream)
        return COMMANDS[config.command](config, writer)
    except KrigeError as e:
        write_error(e.to_dict())
        return e.exit_code
    except OSError as e:
        write_error({"error": "io", "message": str(e)})
        return EXIT_USER
    except Exception as e:  # pragma: no cover
        write_error({"error": "internal", "message": f"{type(e).__name__}: {e}"})
        return EXIT_NUMERIC
    finally:
        logging.getLogger("core").removeHandler(handler)
        if stream is not None and stream is not sys.stdout:
            stream.close()
        elif stream is sys.stdout:
            sys.stdout.flush()


if __name__ == "__main__":
    raise SystemExit(main())
