"""Command-line entry point: ``eprqkd run|verify|explain``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import __version__
from .acceptance import CRITERIA, criterion_by_name, run_criterion
from .scenario import EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, ConfigError, parse_config, run_scenario, write_artifacts


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = parse_config(fh.read())
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    result = run_scenario(config)
    try:
        transcript, report = write_artifacts(result, args.output)
    except OSError as exc:
        print(f"error: cannot write artifacts: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(result.report_text(), end="")
    print(f"wrote {transcript} and {report}")
    return result.exit_status


def _cmd_verify(args: argparse.Namespace) -> int:
    try:
        selected = [criterion_by_name(n) for n in args.only] if args.only else CRITERIA
    except KeyError as exc:
        print(f"error: unknown criterion {exc.args[0]!r}", file=sys.stderr)
        return EXIT_USAGE
    failed = 0
    for criterion in selected:
        verdict = run_criterion(criterion)
        print(verdict.line(), flush=True)
        for label in verdict.failures():
            print(f"      failed: {label}")
        failed += not verdict.passed
    print(f"{len(selected) - failed}/{len(selected)} criteria passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def _cmd_explain(args: argparse.Namespace) -> int:
    try:
        criterion = criterion_by_name(args.scenario)
    except KeyError:
        names = ", ".join(c.name for c in CRITERIA)
        print(f"error: unknown scenario {args.scenario!r}; choose from {names}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{criterion.number}. {criterion.title} [{criterion.name}]")
    print(criterion.claim)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eprqkd", description="EPR-pair key distribution with authentication.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file and write transcript and report")
    run.add_argument("config", help="scenario file (key = value lines)")
    run.add_argument("-o", "--output", help="output base path (overrides output_path in the file)")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify", help="run every acceptance criterion")
    verify.add_argument("only", nargs="*", help="restrict to these criteria (name or number)")
    verify.set_defaults(func=_cmd_verify)

    explain = sub.add_parser("explain", help="describe the claim a scenario checks")
    explain.add_argument("scenario", help="criterion name or number")
    explain.set_defaults(func=_cmd_explain)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
