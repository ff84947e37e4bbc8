"""Batch CLI.

Commands:

  byzlab run --config FILE [--seed N] [--out DIR] [--mode M]
  byzlab verify-transcript FILE
  byzlab sweep --config FILE --param SECTION.KEY --values a,b,c [--out DIR]
  byzlab list-aggregators
  byzlab list-attacks

Exit codes: 0 success, 2 configuration error, 3 protocol abort or
transcript mismatch, 4 I/O failure. BYZLAB_OUT sets the default output
root.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from byzlab.aggregators import AGGREGATOR_KINDS
from byzlab.attacks import SCHEDULES, STRATEGIES
from byzlab.errors import ConfigError, ProtocolAbort
from byzlab.sim.config import load_config
from byzlab.sim.runner import run_scenario, sweep
from byzlab.sim.transcript import verify_transcript

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="byzlab",
        description="Deterministic federated-learning robustness laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario")
    run_p.add_argument("--config", required=True, help="scenario YAML file")
    run_p.add_argument("--seed", type=int, default=None, help="override master seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument(
        "--mode", choices=("plaintext", "crypto"), default=None, help="override mode"
    )

    ver_p = sub.add_parser("verify-transcript", help="re-verify a recorded round")
    ver_p.add_argument("file", help="transcript JSON file")

    sweep_p = sub.add_parser("sweep", help="run a scenario across parameter values")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--param", required=True, help="dotted key, e.g. aggregator.multiplier")
    sweep_p.add_argument("--values", required=True, help="comma-separated values")
    sweep_p.add_argument("--out", default=None)

    sub.add_parser("list-aggregators", help="print available aggregation rules")
    sub.add_parser("list-attacks", help="print available attack strategies and schedules")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None or args.mode is not None:
        run_spec = dataclasses.replace(
            config.run,
            **{
                k: v
                for k, v in {
                    "master_seed": args.seed,
                    "mode": args.mode,
                }.items()
                if v is not None
            },
        )
        config = dataclasses.replace(config, run=run_spec)
        config.validate()
    result, out = run_scenario(config, args.out)
    s = result.summary
    print(f"run complete: {s['rounds_run']} rounds -> {out}")
    print(
        f"  main accuracy {s['final_main_accuracy']:.4f}"
        + (
            f", backdoor accuracy {s['final_backdoor_accuracy']:.4f}"
            if s["final_backdoor_accuracy"] is not None
            else ""
        )
    )
    if s["aborted_rounds"]:
        print(f"  aborted rounds: {s['aborted_rounds']}")
        if not config.run.continue_after_abort:
            return EXIT_PROTOCOL
    return EXIT_OK


def _cmd_verify_transcript(args) -> int:
    report = verify_transcript(args.file)
    for key in ("verdicts_match", "sums_match", "abort_match"):
        print(f"{key}: {report[key]}")
    if report["match"]:
        print(f"transcript {args.file} verified: round {report['round']}, "
              f"clients {report['clients']}")
        return EXIT_OK
    print(f"transcript {args.file} FAILED re-verification")
    return EXIT_PROTOCOL


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    values = [v for v in args.values.split(",") if v]
    if not values:
        raise ConfigError("sweep needs at least one value")
    dirs = sweep(config, args.param, values, args.out)
    for d in dirs:
        print(d)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify-transcript":
            return _cmd_verify_transcript(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "list-aggregators":
            for kind in AGGREGATOR_KINDS:
                print(kind)
            return EXIT_OK
        if args.command == "list-attacks":
            print("strategies:")
            for s in STRATEGIES:
                print(f"  {s}")
            print("schedules:")
            for s in SCHEDULES:
                print(f"  {s}")
            return EXIT_OK
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolAbort as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (OSError, ValueError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
