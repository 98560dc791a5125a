"""Command-line entry point.

Subcommands:
  run              execute a scenario preset or a config file
  summarize        rebuild the summary table from a run directory
  validate-config  parse and check a config file without running

Exit codes: 0 on success, 2 for configuration errors, 3 for run failures.
"""

from __future__ import annotations

import argparse
import sys

from .config import PRESETS, load_config, make_preset
from .errors import ConfigurationError, NetsenseError
from .experiment import format_summary_table, run_scenario, summarize_directory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netsense",
        description="Bandwidth-adaptive gradient compression on a simulated bottleneck link",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario preset or config file")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    src.add_argument("--config", help="path to an INI config file")
    run_p.add_argument("--seed", type=int, default=None, help="override the run seed")
    run_p.add_argument("--out-dir", required=True, help="directory for CSV output")
    run_p.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="config override; repeatable",
    )
    run_p.add_argument(
        "--no-plotdata", action="store_true", help="skip plot-data series files"
    )

    sum_p = sub.add_parser("summarize", help="recompute a run directory's summary")
    sum_p.add_argument("out_dir")

    val_p = sub.add_parser("validate-config", help="check a config file")
    val_p.add_argument("config_path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.preset:
                cfg = make_preset(args.preset)
            else:
                cfg = load_config(args.config)
            # resolve config problems (including overrides) before any cell runs
            try:
                summary = run_scenario(
                    cfg,
                    args.out_dir,
                    seed=args.seed,
                    overrides=args.override,
                    write_plotdata=not args.no_plotdata,
                )
            except ConfigurationError:
                raise
            except NetsenseError as exc:
                print(f"run failed: {exc}", file=sys.stderr)
                return EXIT_RUN
            print(format_summary_table(summary))
            return EXIT_OK
        if args.command == "summarize":
            print(format_summary_table(summarize_directory(args.out_dir)))
            return EXIT_OK
        if args.command == "validate-config":
            load_config(args.config_path)
            print("config OK")
            return EXIT_OK
        raise ConfigurationError(f"unknown command {args.command!r}")
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NetsenseError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
