"""Command-line entry points.

Subcommands: run, sweep, mstar, picard, compare, check.  Configs are JSON
files; the FRFLOW_OUTPUT_ROOT env var relocates relative output directories.
"""

from __future__ import annotations

import argparse
import sys

from . import runner
from .errors import ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frflow",
        description="Birth-death flow experiments with convergence "
                    "certificates on 1-D grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and its checks")
    p_run.add_argument("config", help="path to a JSON config file")

    p_sweep = sub.add_parser("sweep", help="run a parameter grid of "
                                           "experiments")
    p_sweep.add_argument("config", help="path to a JSON config file")
    p_sweep.add_argument("--grid", default="",
                         help="sweep spec, e.g. 'sigma=0.5,1,2;flow.dt=1e-3'")

    p_mstar = sub.add_parser("mstar", help="solve the fixed point and check "
                                           "optimality")
    p_mstar.add_argument("config", help="path to a JSON config file")

    p_picard = sub.add_parser("picard", help="iterate the path-space map and "
                                             "report contraction")
    p_picard.add_argument("config", help="path to a JSON config file")
    p_picard.add_argument("--iters", type=int, default=None,
                          help="number of iterations (default from config)")

    p_compare = sub.add_parser("compare", help="run matched-time flows from "
                                               "one warm start")
    p_compare.add_argument("config", help="path to a JSON config file")
    p_compare.add_argument("--flows", default="birth_death,wasserstein,wfr",
                           help="comma-separated subset of "
                                "birth_death,wasserstein,wfr")

    p_check = sub.add_parser("check", help="re-run diagnostics on persisted "
                                           "outputs")
    p_check.add_argument("output_dir", help="directory written by `run`")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return runner.run_check(args.output_dir)
    try:
        raw = runner.load_config_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "run":
        return runner.run_from_dict(raw)
    if args.command == "sweep":
        return runner.run_sweep(raw, args.grid)
    if args.command == "mstar":
        return runner.run_mstar(raw)
    if args.command == "picard":
        return runner.run_picard(raw, args.iters)
    if args.command == "compare":
        flows = [f.strip() for f in args.flows.split(",") if f.strip()]
        return runner.run_compare(raw, flows)
    raise AssertionError(f"unhandled command {args.command}")


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
