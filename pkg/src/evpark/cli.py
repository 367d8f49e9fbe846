"""Command line interface: run scenario files, write CSV (and figures).

Subcommands map one-to-one to the run functions in :mod:`evpark.scenarios`:
``sweep-mandate``, ``sweep-delta``, ``monopolist``, plus ``validate`` which
only parses a config.  Exit code is 0 when every emitted row converged,
1 otherwise (the failure count goes to stderr), and 2 for bad configs or
usage.
"""
from __future__ import annotations

import argparse
import sys

from . import figures, scenarios


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="scenario file path")
    sub.add_argument("--output", help="output CSV path (overrides the config's output key)")
    sub.add_argument(
        "--figures",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="render PNG charts next to the CSV (default on)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evpark",
        description="Equilibria of EV-charger investment in parking markets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mandate = sub.add_parser(
        "sweep-mandate", help="sweep the mandate share r for a competitive scenario"
    )
    _add_common(mandate)
    mandate.add_argument(
        "--regime",
        choices=sorted(r.value for r in scenarios.PricingRegime),
        help="run a single pricing regime instead of the config's list",
    )
    mandate.add_argument(
        "--oracle", action="store_true",
        help="add brute-force deviation-scan columns to every row",
    )

    delta = sub.add_parser(
        "sweep-delta", help="sweep the endowment share delta over policy variants"
    )
    _add_common(delta)
    delta.add_argument(
        "--oracle", action="store_true",
        help="add brute-force deviation-scan columns to every row",
    )

    mono = sub.add_parser("monopolist", help="solve a monopolist scenario")
    _add_common(mono)
    mono.add_argument(
        "--profile", action="store_true",
        help="emit the whole expected-profit profile as extra rows",
    )

    validate = sub.add_parser("validate", help="check a scenario file and exit")
    validate.add_argument("--config", required=True, help="scenario file path")

    return parser


def _resolve_output(args, scenario) -> str:
    output = args.output or scenario.output
    if output is None:
        raise scenarios.MissingKeyError(
            "no output path: pass --output or set the output key", key="output"
        )
    return output


def _finish(rows, columns, output, render, want_figures) -> int:
    scenarios.emit_csv(rows, columns, output)
    print(f"wrote {output} ({len(rows)} rows)")
    if want_figures:
        for path in render(rows, output):
            print(f"wrote {path}")
    bad = sum(1 for row in rows if str(row.get("status", "")).startswith("error"))
    if bad:
        print(f"{bad} of {len(rows)} rows failed to converge", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = scenarios.load_scenario_file(args.config)
    except scenarios.ConfigError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"OK: valid {scenario.model} scenario")
        return 0

    try:
        output = _resolve_output(args, scenario)
        if args.command == "sweep-mandate":
            if args.regime:
                scenario = scenarios.replace_pricing(scenario, args.regime)
            rows = scenarios.run_mandate_sweep(scenario, oracle=args.oracle)
            return _finish(rows, scenarios.MANDATE_COLUMNS, output,
                           figures.render_mandate_figures, args.figures)
        if args.command == "sweep-delta":
            rows = scenarios.run_delta_sweep(scenario, oracle=args.oracle)
            return _finish(rows, scenarios.DELTA_COLUMNS, output,
                           figures.render_delta_figures, args.figures)
        # monopolist: the profile also feeds the figure, so compute it when
        # either is requested, but only emit profile rows under --profile.
        rows = scenarios.run_monopolist_suite(
            scenario, profile=args.profile or args.figures
        )
        emit = rows if args.profile else [r for r in rows if r["row_type"] != "profile"]
        return _finish(emit, scenarios.MONOPOLIST_COLUMNS, output,
                       lambda _, out: figures.render_monopolist_figures(rows, out),
                       args.figures)
    except (scenarios.ConfigError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
