"""Command line interface.

Subcommands: topics, events, fit, simulate, run. Global flags: --config,
--out, --seed, --lenient. Exit codes: 0 success, 2 config error, 3 input
error, 4 numeric/stability error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import ConfigError, ExciteNetError
from .hawkes import GibbsConfig


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline config TOML")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--lenient", action="store_true",
                        help="skip and count malformed input lines instead of failing")

    parser = argparse.ArgumentParser(
        prog="excitenet",
        description="Topic/price event streams and Hawkes excitation networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("topics", parents=[common],
                   help="fit per-source dynamic topic models")
    sub.add_parser("events", parents=[common],
                   help="build occurrence/price series and detect jump events")
    sub.add_parser("run", parents=[common],
                   help="full pipeline: topics, events, fit")

    fit_p = sub.add_parser("fit", parents=[common],
                           help="fit Hawkes networks from an event CSV")
    fit_p.add_argument("--events", type=Path,
                       help="event CSV for a standalone fit (no config needed)")
    fit_p.add_argument("--grid", type=Path,
                       help="grid JSON (default: grid.json next to --events)")
    fit_p.add_argument("--dt-max", type=int, default=96)
    fit_p.add_argument("--iterations", type=int, default=1500)
    fit_p.add_argument("--burn-in", type=int, default=500)
    fit_p.add_argument("--thinning", type=int, default=1)

    sim_p = sub.add_parser("simulate", parents=[common],
                           help="simulate a network spec into an event CSV")
    sim_p.add_argument("--network", type=Path, required=True,
                       help="network spec JSON")
    sim_p.add_argument("--n-buckets", type=int, required=True)
    return parser


def _config_from(args: argparse.Namespace):
    if args.config is None:
        raise ConfigError(f"'{args.command}' needs --config")
    return load_config(args.config, out_override=args.out,
                       seed_override=args.seed, lenient_override=args.lenient)


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "topics":
        pipeline.cmd_topics(_config_from(args))
    elif args.command == "events":
        pipeline.cmd_events(_config_from(args))
    elif args.command == "run":
        pipeline.cmd_run(_config_from(args))
    elif args.command == "fit":
        if args.events is not None:
            grid = args.grid if args.grid is not None else args.events.parent / "grid.json"
            gibbs = GibbsConfig(iterations=args.iterations, burn_in=args.burn_in,
                                thinning=args.thinning,
                                seed=args.seed if args.seed is not None else 0)
            out_dir = args.out if args.out is not None else args.events.parent
            record = pipeline.run_fit_standalone(args.events, grid, out_dir,
                                                 args.dt_max, gibbs)
            echo = {"events": str(args.events), "dt_max": args.dt_max}
            pipeline.write_manifest(out_dir, "fit", echo, [record])
        else:
            pipeline.cmd_fit(_config_from(args))
    elif args.command == "simulate":
        out_dir = args.out if args.out is not None else Path(".")
        seed = args.seed if args.seed is not None else 0
        pipeline.cmd_simulate(args.network, args.n_buckets, seed, out_dir)
    else:  # pragma: no cover - argparse enforces the choices
        raise ConfigError(f"unknown command '{args.command}'")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ExciteNetError as exc:
        print(f"excitenet: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
