"""
Command-line entry point: ``shrinklab run`` and ``shrinklab validate``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from shrinklab.config import ExperimentConfig
from shrinklab.errors import ConfigError, ShrinkLabError
from shrinklab.experiments import run

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shrinklab",
        description="Shrinking-target and Diophantine approximation experiments.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    verbosity.add_argument("--verbose", action="store_true", help="log debug detail")
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="run the experiment described by a config file")
    run_cmd.add_argument("config", help="path to the JSON experiment config")
    run_cmd.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_cmd.add_argument("--out", default=None, help="override the output directory")

    validate_cmd = sub.add_parser("validate", help="check a config file without running it")
    validate_cmd.add_argument("config", help="path to the JSON experiment config")
    return parser


def _configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        force=True)


def _validate(path: str) -> int:
    config = ExperimentConfig.from_file(path)
    violations = config.validate()
    for v in violations:
        print(v, file=sys.stderr)
    if violations:
        return ConfigError.exit_code
    print(f"{path}: ok")
    return 0


def _run(path: str, seed: int | None, out: str | None) -> int:
    config = ExperimentConfig.from_file(path).with_overrides(seed=seed, output_dir=out)
    result = run(config)
    print(f"manifest: {result.manifest}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.quiet, args.verbose)
    try:
        if args.command == "validate":
            return _validate(args.config)
        return _run(args.config, args.seed, args.out)
    except ShrinkLabError as exc:
        logger.error("while running %s: %s", args.config, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
