"""``sim <scenario> --config <path> [--out <dir>] [--grid N] [--seed S]``.

Exit status: 0 success, 1 scenario failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import SCENARIOS, run_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description="Degenerate OAM ring-cavity scenarios.")
    parser.add_argument("scenario", choices=sorted(SCENARIOS) + ["all"])
    parser.add_argument("--config", required=True, help="YAML configuration file")
    parser.add_argument("--out", default="sim-out", help="output directory (default: sim-out)")
    parser.add_argument("--grid", type=int, default=None, help="override samples per side")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.grid is not None and (args.grid < 32 or args.grid & (args.grid - 1)):
            raise ConfigError(f"--grid: expected a power of two >= 32 (got {args.grid})")
    except ConfigError as exc:
        print(f"sim: {exc}", file=sys.stderr)
        return 2
    art = run_scenario(args.scenario, config, args.out, grid_n=args.grid, seed=args.seed)
    status = art.manifest.get("status")
    failed = art.manifest.get("failed_checks", [])
    print(f"sim {args.scenario}: {status}; {len(art.checks)} checks, {len(failed)} failed; outputs in {args.out}")
    for name in failed:
        print(f"  FAILED {name}")
    if status == "error":
        print(f"  {art.manifest.get('error')}", file=sys.stderr)
    return art.exit_status


if __name__ == "__main__":
    sys.exit(main())
