"""Run the self-checks and log a pass/fail table."""

from __future__ import annotations

import argparse
import logging
import sys

from selftest.checks import CheckResult, run_checks

logger = logging.getLogger(__name__)


def setup_logging(args: argparse.Namespace) -> None:
    """Configure logging based on arguments.

    :param args: Parsed command line arguments with quiet and log_level
    """
    if args.quiet:
        log_level = logging.ERROR
    else:
        log_level = getattr(logging, args.log_level)
    logging.basicConfig(level=log_level, format="%(levelname).1s %(name)s %(message)s")


def _create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Check ground states, kernel identities at L and 2L, and conservation",
        prog="python -m selftest",
    )
    parser.add_argument(
        "--dim",
        type=int,
        choices=[1, 2],
        action="append",
        help="Dimension to check, repeatable (default: 1)",
    )
    parser.add_argument(
        "--skip-conservation",
        action="store_true",
        help="Skip the time-stepping checks",
    )
    parser.add_argument(
        "--profile-cache",
        metavar="DIR",
        help="Directory of cached radial profiles",
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="INFO",
        help="Logging level (default: INFO)",
    )
    parser.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        help="Suppress output (sets log level to ERROR)",
    )
    return parser


def print_result(result: CheckResult, index: int, total: int) -> None:
    """Log one check."""
    mark = "ok" if result.passed else "FAIL"
    log = logger.info if result.passed else logger.error
    log("[%d/%d] %-4s %s = %.3e (tol %.0e)", index, total, mark, result.name, result.value, result.tolerance)


def main(argv: list[str] | None = None) -> int:
    """Parse arguments and run the checks.

    :return: 0 if every check passed, 1 otherwise
    """
    args = _create_parser().parse_args(argv)
    setup_logging(args)
    dims = tuple(sorted(set(args.dim or [1])))
    results = run_checks(dims, conservation=not args.skip_conservation, cache_dir=args.profile_cache)
    for i, result in enumerate(results, 1):
        print_result(result, i, len(results))
    failed = sum(not r.passed for r in results)
    logger.info("-" * 50)
    logger.info("Summary: %d passed, %d failed", len(results) - failed, failed)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
