"""Command-line entry point: ``togglemem run <scenario> [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .scenario import (
    EXIT_SCENARIO, ScenarioError, bundled_scenarios, describe, parse_scenario, run_scenario,
)

log = logging.getLogger("togglemem")


def _scenario_text(ref: str) -> str:
    path = Path(ref)
    if path.is_file():
        return path.read_text()
    bundled = bundled_scenarios()
    if ref in bundled:
        return bundled[ref]
    raise FileNotFoundError(f"no scenario file or bundled example named {ref!r}")


def cmd_run(args) -> int:
    try:
        text = _scenario_text(args.scenario)
        scenario = parse_scenario(text)
    except (OSError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    out = Path(args.out) if args.out else Path("out") / scenario.name
    result = run_scenario(scenario, out)
    for line in result.summary:
        print(line)
    if result.status:
        print(f"error: {result.message or 'run failed'}", file=sys.stderr)
    log.info("wrote artifacts to %s", out)
    return result.status


def cmd_list_examples(args) -> int:
    for name, text in bundled_scenarios().items():
        print(f"{name:14s} {describe(text)}")
    return 0


def cmd_show_example(args) -> int:
    bundled = bundled_scenarios()
    if args.name not in bundled:
        print(f"error: unknown example {args.name!r}", file=sys.stderr)
        return EXIT_SCENARIO
    sys.stdout.write(bundled[args.name])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="togglemem", description="Adiabatic toggle-memory scenarios.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or bundled example")
    run.add_argument("scenario", help="path to a scenario file, or a bundled example name")
    run.add_argument("--out", help="output directory (default: out/<scenario name>)")
    run.set_defaults(func=cmd_run)

    ls = sub.add_parser("list-examples", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list_examples)

    show = sub.add_parser("show-example", help="print a bundled scenario")
    show.add_argument("name")
    show.set_defaults(func=cmd_show_example)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
