"""Command-line entry points: run suites, replay trials, regenerate figures."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .apo import InvariantViolation
from .experiments import PRESETS, load_config, load_preset, replay, run_suite
from .figures import render_figures

EXIT_INVARIANT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcspsim",
        description="Deterministic APO/AWC simulation workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment suite")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--suite", choices=PRESETS, help="built-in preset suite")
    src.add_argument("--config", help="custom suite config (INI)")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--trace", action="store_true",
                     help="write one message-trace log per trial")
    run.add_argument("--cycle-limit", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    run.add_argument("--assert-invariants", action=argparse.BooleanOptionalAction,
                     default=True)
    run.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)

    rep = sub.add_parser("replay", help="re-run one manifest trial with a trace")
    rep.add_argument("--manifest", required=True)
    rep.add_argument("--cell", required=True)
    rep.add_argument("--index", type=int, required=True)
    rep.add_argument("--protocol", choices=("apo", "awc"), default=None)
    rep.add_argument("--cycle-limit", type=int, default=None)
    rep.add_argument("--out", default=None, help="write the trace here instead of stdout")

    fig = sub.add_parser("report", help="render figures from an existing cells.csv")
    fig.add_argument("--cells", required=True)
    fig.add_argument("--out", default="figures")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_preset(args.suite) if args.suite else load_config(args.config)
            suite = run_suite(
                config,
                args.out,
                jobs=args.jobs,
                trace=args.trace,
                assert_invariants=args.assert_invariants,
                cycle_limit=args.cycle_limit,
                figures=args.figures,
            )
            print(f"{len(suite.trials)} trials -> {args.out}")
            return 0
        if args.command == "replay":
            result, trace = replay(args.manifest, args.cell, args.index,
                                   protocol=args.protocol,
                                   cycle_limit=args.cycle_limit)
            text = "\n".join(trace) + ("\n" if trace else "")
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            print(result.canonical())
            return 0
        made = render_figures(args.cells, args.out)
        print(f"{len(made)} figures -> {args.out}")
        return 0
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
