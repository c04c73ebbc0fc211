"""Command-line front end.

    glassmem <experiment> [--config PATH] [--seed S] [--workers K] [--out DIR]
    glassmem validate [--config PATH]

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from ..errors import ConfigError, GlassMemError
from .config import EXPERIMENT_NAMES, default_config, load_config, validate
from .runner import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glassmem",
        description="Seeded, parallel figure-reproduction experiments "
                    "writing plot-ready CSV plus a run manifest.")
    parser.add_argument("experiment",
                        choices=sorted(EXPERIMENT_NAMES) + ["validate"],
                        help="experiment to run, or 'validate' to check a "
                             "config without running")
    parser.add_argument("--config", metavar="PATH",
                        help="YAML config file (defaults per experiment)")
    parser.add_argument("--seed", type=int, metavar="S",
                        help="override base_seed")
    parser.add_argument("--workers", type=int, metavar="K",
                        help="override worker count")
    parser.add_argument("--out", metavar="DIR",
                        help="override output directory")
    return parser


def _load(args) -> "ExperimentConfig":
    if args.experiment == "validate":
        if args.config is None:
            raise ConfigError("validate requires --config PATH")
        return load_config(args.config)
    if args.config is not None:
        config = load_config(args.config)
        if config.experiment != args.experiment:
            raise ConfigError(
                f"config file is for {config.experiment!r}, "
                f"not {args.experiment!r}")
    else:
        config = default_config(args.experiment)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load(args)
        if args.experiment == "validate":
            report = validate(config)
            if report:
                for line in report:
                    print(line)
            else:
                print("ok")
            return 0
        manifest = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GlassMemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"{manifest.experiment}: {len(manifest.outputs)} output files in "
          f"{manifest.wall_clock_s:.1f}s")
    for name, digest in sorted(manifest.outputs.items()):
        print(f"  {name}  sha256:{digest[:16]}")
    return 0


def entry() -> None:
    sys.exit(main())
