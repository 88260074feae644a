#!/usr/bin/env python3
"""
twodcs-sim: two-dimensional coherent spectra of a driven three-level system
and of a six-level vibrational model.

Usage:
    main.py <mode> --config run.ini [--out DIR] [--format csv,bin,plot,png]
"""
import argparse
import logging
import os
import sys

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from version_info import VERSION, TOOL_NAME
from core.errors import ConfigError, SimulationError
from core.runner import RunEngine
from models.config import OutputFormat, RunConfig, RunMode, parse_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

logger = logging.getLogger(TOOL_NAME)


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s [%(levelname)s] %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description=__doc__.strip().splitlines()[0])
    parser.add_argument("mode", choices=[m.value for m in RunMode])
    parser.add_argument("--config", help="run configuration file; omitted = built-in defaults")
    parser.add_argument("--out", help="output directory (overrides [run] out_dir)")
    parser.add_argument("--format", dest="formats", help="comma-separated subset of csv,bin,plot,png")
    parser.add_argument("--workers", type=int, help="threads for grid evaluation")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("-v", "--verbose", action="store_true")
    group.add_argument("-q", "--quiet", action="store_true")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {VERSION}")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with the command-line overrides applied."""
    mode = RunMode(args.mode)
    config = parse_config(args.config, mode) if args.config else RunConfig(mode=mode)
    if args.out:
        config.out_dir = args.out
    if args.formats:
        try:
            config.formats = OutputFormat.parse_list(args.formats)
        except ValueError as e:
            raise ConfigError(str(e), key="format") from None
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1", key="workers")
        config.workers = args.workers
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        config = load_config(args)
        RunEngine(config).run()
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except SimulationError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except Exception:
        logger.exception("unexpected failure")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
