"""
Command-line front end.

Subcommands:
  fig1       average SE per device vs N for several kappa (CSV + PNG)
  fig2       sum SE vs N under kappa^2 = kappa0^2 N^z (CSV + PNG)
  sweep      generic grid run, either mode (CSV)
  validate   run the acceptance checks, write a JSON report
  plot-data  split a fig1/fig2 CSV into per-curve .dat files

Exit status: 0 success, 1 validation failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .model import ConfigError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2

logger = logging.getLogger("mmrelay")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {value}")
    return value


def create_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value experiment file")
    common.add_argument("--trials", type=_positive_int, help="Monte Carlo trials per grid point")
    common.add_argument("--seed", type=_seed, help="master seed")
    common.add_argument("--threads", type=_positive_int, help="worker threads (results do not depend on it)")
    common.add_argument("--output", help="output file")
    common.add_argument("--distortion-mode", choices=("realization", "expectation"))
    common.add_argument("--paper-fading", action="store_true",
                        help="draw large-scale fading from N(1, 0.2) instead of all ones")
    common.add_argument("-v", "--verbose", action="store_true")

    figure = argparse.ArgumentParser(add_help=False)
    figure.add_argument("--no-figure", action="store_true", help="skip the PNG rendering")
    figure.add_argument("--record-time", action="store_true",
                        help="fill the wallclock_ms column (makes the CSV run-dependent)")

    parser = argparse.ArgumentParser(
        prog="mmrelay",
        description="Massive-MIMO two-way AF relaying with hardware impairments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fig1", parents=[common, figure], help="average SE per device for several kappa")
    sub.add_parser("fig2", parents=[common, figure], help="sum SE under the hardware scaling law")
    sweep = sub.add_parser("sweep", parents=[common], help="generic parameter sweep")
    sweep.add_argument("--record-time", action="store_true")
    validate = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    validate.add_argument("--checks", help="comma-separated subset of: " + ", ".join(experiments.VALIDATION_CHECKS))
    plot = sub.add_parser("plot-data", help="per-curve data files from a fig1/fig2 CSV")
    plot.add_argument("csv", help="CSV written by fig1 or fig2")
    plot.add_argument("--output", help="output directory (default: next to the CSV)")
    plot.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args) -> dict:
    out = {
        "trials": args.trials,
        "seed": args.seed,
        "threads": args.threads,
        "output": args.output,
        "distortion_mode": args.distortion_mode,
    }
    if args.paper_fading:
        out["fading"] = "paper"
    if getattr(args, "record_time", False):
        out["record_time"] = True
    return out


def main(argv=None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "plot-data":
            for path in experiments.emit_plot_data(args.csv, args.output):
                print(path)
            return EXIT_OK

        spec = experiments.parse_experiment(args.config, _overrides(args), command=args.command)
        if args.command == "fig1":
            print(experiments.run_fig1(spec, render=not args.no_figure))
        elif args.command == "fig2":
            print(experiments.run_fig2(spec, render=not args.no_figure))
        elif args.command == "sweep":
            out = spec.output_path or "sweep.csv"
            experiments.write_csv(experiments.run_sweep(spec), out)
            print(out)
        elif args.command == "validate":
            checks = args.checks.split(",") if args.checks else None
            report, ok = experiments.run_validate(spec, checks=checks)
            print(report)
            if not ok:
                print("validation FAILED; see report", file=sys.stderr)
                return EXIT_VALIDATION
        return EXIT_OK
    except ConfigError as exc:
        print(f"mmrelay: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mmrelay: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
