"""Summarise run directories into tables."""

from __future__ import annotations

import argparse
import logging
import sys

from bubbles import config
from bubbles.errors import EmptyReportError
from report.tables import build_tables, collect, format_table, write_tables

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
        description="Tables of rate fits, conservation, Mod/Scal, overlaps, contraction and Cauchy distances",
        prog="python -m report",
    )
    parser.add_argument("run_dirs", nargs="*", metavar="RUN_DIR", help="Run directories")
    parser.add_argument("--csv-dir", metavar="DIR", help="Also write one CSV per table into DIR")
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


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, print the tables and optionally write them.

    :return: 0 on success, 2 when there is nothing to report
    """
    args = _create_parser().parse_args(argv)
    setup_logging(args)
    try:
        tables = build_tables(collect(args.run_dirs))
    except EmptyReportError as exc:
        logger.error("%s", exc)
        return config.EXIT_VALIDATION
    for table in tables:
        print(format_table(table))
        print()
    if args.csv_dir:
        paths = write_tables(args.csv_dir, tables)
        logger.info("Wrote %d tables to %s", len(paths), args.csv_dir)
    return config.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
