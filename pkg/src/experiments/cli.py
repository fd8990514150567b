"""
Command-line entry points.

    antipiracy-lab soundness --config configs/soundness.json --out results/
    antipiracy-lab report results/soundness
    piracy run --n 8 --pirate measure-resend --trials 10000 --seed 42 --out results.csv
    calculus pipeline --k 2 --p 1 --preset projective --out report.json

Exit status: 0 when every asserted bound passed, 1 when one failed, 2 for an
invalid configuration or unreadable result files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import pandas as pd
import structlog

from src.calculus.pipeline import compose_theorem_pipeline
from src.calculus.toy import TOY_PRESETS, build_toy_verifier
from src.core.config import get_settings
from src.core.errors import ConfigError, LabError, ReportError, StageError
from src.core.log_config import bind_run_context, configure_logging
from src.core.metrics import write_metrics_textfile
from src.experiments.report import build_report
from src.experiments.runner import run_experiment
from src.experiments.schemas import EXPERIMENT_KINDS, config_digest, load_config, parse_config
from src.piracy.game import GAME_MODES, run_piracy_game
from src.piracy.pirates import available_pirates

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def _setup_logging() -> None:
    settings = get_settings()
    configure_logging(settings.environment, settings.log_level)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment config JSON (defaults for the kind when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="Override the config's master seed")
    parser.add_argument("--out", default="results", help="Output directory (default: results)")
    parser.add_argument("--jobs", type=int, default=None, help="Parallel workers (default: LAB_DEFAULT_JOBS)")
    parser.add_argument("--metrics-out", default=None, help="Write Prometheus metrics to this file")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antipiracy-lab",
        description="Exact simulation experiments for anti-piracy proofs and the cloneable-witness calculus",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        _add_common(sub.add_parser(kind, help=f"Run a {kind} experiment"))
    run = sub.add_parser("run", help="Run whatever kind the config names")
    _add_common(run)
    report = sub.add_parser("report", help="Summarize result files")
    report.add_argument("results", help="Result prefix, CSV or JSON path")
    report.add_argument("--series-out", default=None, help="Write plot-ready series CSV here")
    return parser


def _load(command: str, args: argparse.Namespace):
    if args.config:
        config = load_config(args.config)
    elif command == "run":
        raise ConfigError("`run` needs --config")
    else:
        config = parse_config({"kind": command, "experiment_id": command})
    if command != "run" and config.kind != command:
        raise ConfigError(f"config is a {config.kind} experiment, not {command}")
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def _run(command: str, args: argparse.Namespace) -> int:
    config = _load(command, args)
    digest = config_digest(config)
    bind_run_context(config.experiment_id, digest, config.seed)
    result = run_experiment(config, args.out, jobs=args.jobs)
    if args.metrics_out:
        write_metrics_textfile(args.metrics_out)
    print(f"{config.kind}: {len(result.records)} records -> {result.csv_path}")
    for outcome, count in sorted(result.counts.items()):
        print(f"  {outcome}: {count}")
    return result.exit_status


def _report(args: argparse.Namespace) -> int:
    report = build_report(args.results, series_out=args.series_out)
    print(report.render())
    return EXIT_FAILED if report.failed else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    _setup_logging()
    try:
        if args.command == "report":
            return _report(args)
        return _run(args.command, args)
    except (ConfigError, ReportError) as exc:
        logger.error("invalid_input", command=args.command, error=str(exc))
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_INVALID


# ============================================================================
# piracy
# ============================================================================


def piracy_main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="piracy", description="Play the anti-piracy game once")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="Score one pirate against two verifiers")
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--pirate", required=True, choices=available_pirates())
    run.add_argument("--v1", default="vstar")
    run.add_argument("--v2", default="vstar")
    run.add_argument("--trials", type=int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--mode", default="auto", choices=GAME_MODES)
    run.add_argument("--protocol", default="lab", choices=("lab", "npcand"))
    run.add_argument("--budget", type=int, default=None)
    run.add_argument("--jobs", type=int, default=None)
    run.add_argument("--out", default=None, help="CSV file for the outcome row")
    args = parser.parse_args(argv)
    _setup_logging()

    try:
        outcome = run_piracy_game(
            args.n,
            args.pirate,
            args.v1,
            args.v2,
            args.trials,
            args.seed,
            mode=args.mode,
            jobs=args.jobs,
            protocol=args.protocol,
            budget=args.budget,
        )
    except LabError as exc:
        logger.error("invalid_input", command="piracy run", error=str(exc))
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_INVALID

    frame = pd.DataFrame([outcome.to_row()])
    if args.out:
        target = Path(args.out)
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False, float_format="%.12g")
        print(f"[OK] wrote {target}")
    print(frame.to_string(index=False))
    for note in outcome.notes:
        print(f"note: {note}")
    return EXIT_OK


# ============================================================================
# calculus
# ============================================================================


def calculus_main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="calculus", description="Verifier transformation chain")
    sub = parser.add_subparsers(dest="command", required=True)
    pipe = sub.add_parser("pipeline", help="Run the four transformations on a toy verifier")
    pipe.add_argument("--k", type=int, default=2)
    pipe.add_argument("--p", type=int, default=1)
    pipe.add_argument("--preset", default="projective", choices=TOY_PRESETS)
    pipe.add_argument("--c", type=float, default=2 / 3)
    pipe.add_argument("--s", type=float, default=1 / 3)
    pipe.add_argument("--q", type=int, default=None)
    pipe.add_argument("--ell1", type=int, default=20)
    pipe.add_argument("--ell2", type=int, default=40)
    pipe.add_argument("--seed", type=int, default=0)
    pipe.add_argument("--out", default=None, help="JSON file for the pipeline report")
    args = parser.parse_args(argv)
    _setup_logging()

    try:
        verifier = build_toy_verifier(args.preset, args.k, args.p, args.c, args.s)
        report = compose_theorem_pipeline(verifier, args.q, args.ell1, args.ell2, seed=args.seed)
    except StageError as exc:
        logger.error("pipeline_stage_failed", stage=exc.stage, error=str(exc.cause))
        print(f"FAILED at stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_FAILED
    except LabError as exc:
        logger.error("invalid_input", command="calculus pipeline", error=str(exc))
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_INVALID

    for stage in report.stages:
        measured_s = "n/a" if stage.measured_s is None else f"{stage.measured_s:.6g}"
        print(
            f"{stage.stage:24s} {stage.outcome:5s} "
            f"claimed=({stage.claimed.c:.6g}, {stage.claimed.s:.6g}) "
            f"measured=({stage.measured_c:.6g}, {measured_s})"
        )
    if args.out:
        print(f"[OK] wrote {report.write_json(args.out)}")
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
