"""Command-line front end for the pitfall-scenario harness."""
from __future__ import annotations

import argparse
import json
import sys

from .harness import RunSpec, format_text, run_matrix
from .scenarios import CATALOGUE, SCENARIO_IDS

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsim",
        description="Run capability-model pitfall scenarios in buggy and fixed form.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="print the scenario catalogue")

    run = sub.add_parser("run", help="run scenarios and report pass/fail")
    run.add_argument("scenarios", nargs="+",
                     help="scenario ids (S1..S12) or 'all'")
    run.add_argument("--mode", choices=["buggy", "fixed", "both"], default="both")
    run.add_argument("--seal-semantics", choices=["fault", "invalidate", "both"],
                     default="both")
    run.add_argument("--opt-level", choices=["O0", "O1", "both"], default="both")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--format", choices=["text", "json"], default="text")
    run.add_argument("--out", default=None,
                     help="write the report to this path instead of stdout")
    return parser


def _cmd_list() -> int:
    rows = [("id", "name", "category", "title", "buggy expectation")]
    for sid in SCENARIO_IDS:
        info = CATALOGUE[sid]
        rows.append((info.sid, info.name, info.category, info.title,
                     info.buggy_expectation))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return EXIT_OK


def _cmd_run(args) -> int:
    ids = list(SCENARIO_IDS) if "all" in args.scenarios else args.scenarios
    try:
        spec = RunSpec(
            scenarios=tuple(ids),
            mode=args.mode,
            seal_semantics=args.seal_semantics,
            opt_level=args.opt_level,
            seed=args.seed,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    report = run_matrix(spec)
    rendered = json.dumps(report, indent=2) if args.format == "json" \
        else format_text(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rendered + "\n")
    else:
        print(rendered)
    return EXIT_OK if report["summary"]["failed"] == 0 else EXIT_FAILURES


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "list":
            return _cmd_list()
        return _cmd_run(args)
    except Exception as exc:  # simulator bug, not a scenario failure
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
