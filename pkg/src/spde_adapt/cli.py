"""Command-line interface for the benchmark harness.

Subcommands:
    converge    strong-convergence table (rms error per scheme and dt_max)
    efficiency  error-versus-CPU table
    trace       per-step diagnostics of a single realisation
    selftest    built-in oracle/property checks

Exit codes: 0 success, 1 runtime failure (for example an all-diverged
ensemble), 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import load_config
from .harness import (
    EmptyEnsembleError,
    ExperimentConfig,
    efficiency_study,
    realization_trace,
    run_ensemble,
    write_converge_csv,
    write_efficiency_csv,
)
from .selftest import run_selftest


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spde-adapt",
        description="Adaptive time-stepping benchmarks for semilinear stochastic PDEs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    converge = sub.add_parser("converge", help="strong-convergence study")
    converge.add_argument("--config", required=True, help="key=value config file")
    converge.add_argument("--outdir", help="override the configured output directory")

    efficiency = sub.add_parser("efficiency", help="error-versus-CPU study")
    efficiency.add_argument("--config", required=True)
    efficiency.add_argument("--outdir")

    trace = sub.add_parser("trace", help="single-realisation diagnostics")
    trace.add_argument("--config", required=True)
    trace.add_argument("--scheme", required=True)
    trace.add_argument("--trial", type=int, default=0)
    trace.add_argument("--outdir")

    sub.add_parser("selftest", help="run the built-in check suite")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "outdir", None):
        cfg = replace(cfg, outdir=args.outdir)
    cfg.validate()
    return cfg


def _print_report(report) -> None:
    print(f"{'scheme':>8} {'dt_max':>12} {'rms':>14} {'mean_dt':>12} "
          f"{'backstop':>9} {'diverged':>9} {'cpu_s':>10}")
    for p in report.points:
        print(
            f"{p.scheme:>8} {p.dt_max:>12.6g} {p.rms:>14.6e} {p.mean_dt:>12.4g} "
            f"{p.backstop_rate:>9.3g} {p.diverged:>9d} {p.cpu_mean_s:>10.4g}"
        )
    for scheme, fit in report.slopes.items():
        print(f"slope[{scheme}] = {fit.slope:.4f} +/- {fit.half_width:.4f}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "selftest":
        failures = run_selftest()
        return 0 if failures == 0 else 1

    try:
        cfg = _load(args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "converge":
            report = run_ensemble(cfg)
            os.makedirs(cfg.outdir, exist_ok=True)
            out = write_converge_csv(report, cfg, os.path.join(cfg.outdir, "converge.csv"))
            _print_report(report)
            print(f"wrote {out}")
        elif args.command == "efficiency":
            report = efficiency_study(cfg)
            os.makedirs(cfg.outdir, exist_ok=True)
            out = write_efficiency_csv(report, cfg, os.path.join(cfg.outdir, "efficiency.csv"))
            _print_report(report)
            print(f"wrote {out}")
        elif args.command == "trace":
            diag, out = realization_trace(args.scheme, cfg, args.trial)
            status = "diverged" if diag.diverged else "completed"
            print(
                f"{status}: {diag.n_steps} steps, mean dt {diag.mean_dt:.4g}, "
                f"{diag.backstop_count} backstop, {diag.switch_off_count} switched-off"
            )
            print(f"wrote {out}")
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command!r}")
    except EmptyEnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
