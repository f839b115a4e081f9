"""Command-line entry point.

One subcommand per experiment; the YAML config supplies everything else,
with a few common overrides as flags.  Exit codes: 0 success, 2 invalid
configuration, 3 numerical failure during the run.
"""

import argparse
import sys

import yaml

from .config import EXPERIMENTS, ConfigError, parse_config
from .errors import SimulationError
from .runner import run


def _parser():
    parser = argparse.ArgumentParser(
        prog="mapgate",
        description="simulated tune-up and tomography of the "
                    "microwave-activated conditional-phase gate")
    sub = parser.add_subparsers(dest="experiment", required=True,
                                metavar="|".join(EXPERIMENTS))
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True,
                       help="YAML experiment configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--workers", type=int,
                       help="worker processes for grid sweeps")
        p.add_argument("--seed", type=int,
                       help="seed for sampled measurements")
        p.add_argument("--shots", help="shots per measured point, or 'inf' "
                                       "for exact expectation values")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            mapping = yaml.safe_load(fh)
        if not isinstance(mapping, dict):
            raise ConfigError([f"{args.config}: top level must be a mapping"])
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except yaml.YAMLError as exc:
        print(f"error: config is not valid YAML: {exc}", file=sys.stderr)
        return 2

    mapping["experiment"] = args.experiment
    if args.out is not None:
        mapping.setdefault("output", {})["dir"] = args.out
    if args.workers is not None:
        mapping["workers"] = args.workers
    if args.seed is not None:
        mapping["seed"] = args.seed
    if args.shots is not None:
        mapping.setdefault("numerics", {})["shots"] = (
            None if args.shots == "inf" else args.shots)

    try:
        cfg = parse_config(mapping)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg)
    except SimulationError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    files = ", ".join(sorted(manifest.files))
    print(f"{cfg.experiment}: wrote {files} to {cfg.outdir} "
          f"in {manifest.timings['total_s']}s")
    for w in manifest.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
