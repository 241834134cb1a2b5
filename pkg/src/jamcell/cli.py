"""Command-line entry point ``jamcell``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, ExperimentConfig, load_config
from .experiments import run_experiment, with_overrides

LOG_ENV = "JAMCELL_LOG_LEVEL"
COMMANDS = ("ssb-attack", "cell-sweep", "mobility-trace")


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jamcell", description="5G NR SSB jamming experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (defaults used when omitted)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seeds", type=_seeds, help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.parallel < 1:
        print("jamcell: --parallel must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = with_overrides(cfg, kind=args.command, seeds=args.seeds)
        files = run_experiment(cfg, args.out, workers=args.parallel)
    except (ConfigError, OSError) as e:
        print(f"jamcell: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"jamcell: run failed: {e}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
