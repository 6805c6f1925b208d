"""Command line entry point: `perfedavg {train,diagnose,partition,compare} [options]`."""

import argparse
import logging
import os
import sys
from typing import List, Optional, Tuple

from perfedavg_simulator.cli.experiments import COMMANDS, run
from perfedavg_simulator.cli.run_spec import (
    RunSpec,
    parse_run_spec,
    resolve_workers,
    validate_run_spec,
)
from perfedavg_simulator.common.constants import ENV_VARS, EXIT_CODES, LOG_FORMAT, PROFILES
from perfedavg_simulator.common.errors import (
    ConfigError,
    DataError,
    DataShortageError,
    HypothesisViolationError,
    InvalidArgumentError,
    NumericError,
    PerFedAvgError,
    SingularSystemError,
    UnsupportedOperationError,
)

logger = logging.getLogger(__name__)

LOG_LEVELS = ("debug", "info", "warning", "error")

# Failure categories in match order; subclasses come before their bases
_CATEGORIES = (
    ("data", (DataShortageError, DataError), EXIT_CODES.DATA),
    ("numeric", (NumericError, SingularSystemError), EXIT_CODES.NUMERIC),
    (
        "config",
        (ConfigError, InvalidArgumentError, HypothesisViolationError, UnsupportedOperationError),
        EXIT_CODES.CONFIG,
    ),
)


def exit_code_for(error: PerFedAvgError) -> Tuple[str, int]:
    """Failure category and process exit status of an error."""
    for category, types, code in _CATEGORIES:
        if isinstance(error, types):
            return category, code
    return "config", EXIT_CODES.CONFIG


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML run configuration file")
    common.add_argument("--seed", type=int, default=None, help="Root seed, overriding the file")
    common.add_argument("--out-dir", default=None, help="Output directory, overriding the file")
    common.add_argument("--profile", choices=sorted(PROFILES), default=None, help="Named profile")
    common.add_argument(
        "--workers", type=int, default=None, help=f"Client worker threads, else {ENV_VARS.WORKERS}"
    )
    common.add_argument("--log-level", choices=LOG_LEVELS, default="info")

    parser = argparse.ArgumentParser(prog="perfedavg", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        summary = handler.__doc__.strip().splitlines()[0]
        subparsers.add_parser(name, parents=[common], help=summary)
    return parser


def load_spec(args: argparse.Namespace) -> RunSpec:
    """The run spec named by the parsed arguments, with the command-line overrides applied.

    Raises:
        ConfigError: If the configuration file is missing or invalid.
    """
    text = ""
    if args.config is not None:
        if not os.path.isfile(args.config):
            raise ConfigError(f"configuration file not found: {args.config}", field="--config")
        with open(args.config, "r", encoding="utf-8") as config_file:
            text = config_file.read()
    spec = parse_run_spec(text, profile=args.profile)
    if args.seed is not None:
        spec.seed = args.seed
    return validate_run_spec(spec)


def main(args: Optional[List[str]] = None) -> int:
    parsed = build_parser().parse_args(args)
    logging.basicConfig(level=getattr(logging, parsed.log_level.upper()), format=LOG_FORMAT)
    try:
        spec = load_spec(parsed)
        workers = resolve_workers(spec, parsed.workers)
        logger.debug(f"Running {parsed.command} with seed {spec.seed} and {workers} workers")
        run(spec, parsed.command, parsed.out_dir, workers)
    except PerFedAvgError as error:
        category, code = exit_code_for(error)
        logger.error(f"{parsed.command} failed with a {category} error: {error}")
        return code
    return EXIT_CODES.SUCCESS


if __name__ == "__main__":
    sys.exit(main())
