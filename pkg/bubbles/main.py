"""Command line for multi-bubble constructions.

python -m bubbles construct --config data/configs/d1_k1_deterministic.yaml
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass

import yaml

from bubbles import config
from bubbles.errors import (
    ConfigError,
    ConfigMismatchError,
    DivergenceError,
    MisalignedRunsError,
    ResolutionError,
)
from bubbles.runconfig import KINDS, RunConfig, load_config

logger = logging.getLogger(__name__)

_FORWARDED = ("report", "selftest")


@dataclass
class RunArgs:
    """Parsed and validated arguments of a run subcommand.

    :ivar command: construct, pair, cauchy or sweep
    :ivar config: Path to the YAML run config
    :ivar seed: Noise seed override
    :ivar out_dir: Run directory override
    :ivar checkpoints: Checkpoint count override
    :ivar workers: Worker process override
    """

    command: str
    config: str
    seed: int | None = None
    out_dir: str | None = None
    checkpoints: int | None = None
    workers: int | None = None


def _create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser.

    :return: Configured ArgumentParser instance
    """
    parser = argparse.ArgumentParser(
        prog="python -m bubbles",
        description="Construct and check multi-bubble blow-up solutions of the mass-critical NLS",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exit codes:
  0 success, 2 invalid config, 3 divergence, 4 resolution stop before any fit window

Examples:
  # Deterministic single bubble
  python -m bubbles construct --config data/configs/d1_k1_deterministic.yaml

  # Two noisy bubbles with another seed and run directory
  python -m bubbles construct --config data/configs/d1_k2_noisy.yaml --seed 7 --out-dir runs/seed7

  # Summarise run directories
  python -m bubbles report runs/d1_k1 runs/d1_k2
""",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for kind in KINDS:
        sub = subparsers.add_parser(kind, help=f"Run a {kind} experiment")
        sub.add_argument("--config", required=True, metavar="FILE", help="YAML run config")
        sub.add_argument("--seed", type=int, help="Override noise.seed")
        sub.add_argument("--out-dir", metavar="DIR", help="Override out_dir")
        sub.add_argument("--checkpoints", type=int, metavar="N", help="Override controller.checkpoints")
        sub.add_argument("--workers", type=int, metavar="N", help="Override workers")
        sub.add_argument(
            "--log-level",
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            default="INFO",
            help="Logging level (default: INFO)",
        )
        sub.add_argument(
            "-q",
            "--quiet",
            action="store_true",
            help="Quiet mode (sets log level to ERROR)",
        )
    subparsers.add_parser("report", help="Summarise run directories (see python -m report -h)")
    subparsers.add_parser("selftest", help="Kernel identities and conservation (see python -m selftest -h)")
    return parser


def _validate_args(args: argparse.Namespace) -> None:
    """Validate parsed command-line arguments.

    :param args: Parsed arguments from argparse
    :raises SystemExit: If validation fails
    """
    if args.checkpoints is not None and args.checkpoints < 2:
        logger.error("Invalid checkpoints '%s'. Need at least 2.", args.checkpoints)
        sys.exit(config.EXIT_VALIDATION)
    if args.workers is not None and args.workers < 1:
        logger.error("Invalid workers '%s'. Must be a positive integer.", args.workers)
        sys.exit(config.EXIT_VALIDATION)


def parse_args(argv: list[str] | None = None) -> RunArgs:
    """Parse and validate command-line arguments of a run subcommand.

    :param argv: Argument list to parse (defaults to sys.argv)
    :return: Validated RunArgs instance
    :raises SystemExit: If arguments are invalid
    """
    parser = _create_parser()
    args = parser.parse_args(argv)

    if args.quiet:
        log_level = logging.ERROR
    else:
        log_level = getattr(logging, args.log_level)
    logging.basicConfig(
        level=log_level,
        format="%(levelname).1s %(name)s %(message)s",
    )

    _validate_args(args)

    return RunArgs(
        command=args.command,
        config=args.config,
        seed=args.seed,
        out_dir=args.out_dir,
        checkpoints=args.checkpoints,
        workers=args.workers,
    )


def prepare_config(args: RunArgs) -> RunConfig:
    """Load the config file and apply command-line overrides.

    :raises ConfigError: If the file is invalid or its kind differs from the subcommand
    """
    cfg = load_config(args.config)
    if cfg.kind != args.command:
        raise ConfigError("kind", f"config is a {cfg.kind} run, not {args.command}")
    if args.seed is not None and cfg.noise is None:
        raise ConfigError("noise.seed", "--seed needs a noise section")
    cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out_dir, checkpoints=args.checkpoints)
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg


def exit_code_for(exc: Exception) -> int:
    """Exit code of an exception escaping a run."""
    if isinstance(exc, (ConfigError, ConfigMismatchError, MisalignedRunsError)):
        return config.EXIT_VALIDATION
    if isinstance(exc, DivergenceError):
        return config.EXIT_DIVERGED
    if isinstance(exc, ResolutionError):
        return config.EXIT_RESOLUTION
    raise exc


def main(argv: list[str] | None = None) -> int:
    """Entry point of python -m bubbles.

    :param argv: Arguments without the program name (defaults to sys.argv[1:])
    :return: Exit code
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in _FORWARDED:
        if argv[0] == "report":
            from report.main import main as report_main

            return report_main(argv[1:])
        from selftest.main import main as selftest_main

        return selftest_main(argv[1:])

    args = parse_args(argv)
    try:
        cfg = prepare_config(args)
    except OSError as exc:
        logger.error("Cannot read %s: %s", args.config, exc)
        return config.EXIT_VALIDATION
    except yaml.YAMLError as exc:
        logger.error("Malformed YAML in %s: %s", args.config, exc)
        return config.EXIT_VALIDATION
    except ConfigError as exc:
        logger.error("Invalid config %s: %s", args.config, exc)
        return config.EXIT_VALIDATION

    from bubbles.pipeline import run

    try:
        record = run(cfg)
    except (ValueError, RuntimeError) as exc:
        code = exit_code_for(exc)
        logger.error("%s", exc)
        return code

    logger.info("Run directory: %s (status %s)", record.run_dir, record.status)
    return record.exit_code
