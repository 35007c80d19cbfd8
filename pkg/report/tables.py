"""Summary tables across run directories."""

from __future__ import annotations

import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass, field

from bubbles import config
from bubbles.data import read_summary, write_csv
from bubbles.errors import EmptyReportError

logger = logging.getLogger(__name__)


@dataclass
class RunSummary:
    """summary.txt of one run directory.

    :ivar run_dir: Directory the summary came from
    :ivar values: Raw key/value strings
    :ivar complete: Whether summary.txt exists
    """

    run_dir: str
    values: dict[str, str]
    complete: bool

    @property
    def name(self) -> str:
        return os.path.basename(os.path.normpath(self.run_dir))

    @property
    def kind(self) -> str:
        return self.values.get("kind", "")


@dataclass
class TableSpec:
    title: str
    kinds: tuple[str, ...]
    columns: tuple[str, ...]
    required: tuple[str, ...]


@dataclass
class Table:
    """One report table and the runs it could not fill."""

    title: str
    columns: list[str]
    rows: list[dict[str, str]] = field(default_factory=list)
    incomplete: list[str] = field(default_factory=list)


TABLES = (
    TableSpec(
        "Rate fits",
        ("construct",),
        ("status", "T_est", "omega_est", "rate_fit_residual", "rate_ratio_min", "rate_ratio_max", "remainder_exponent"),
        ("T_est", "omega_est"),
    ),
    TableSpec(
        "Conservation",
        ("construct",),
        ("status", "mass_drift_per_time", "energy_drift_per_time", "mass_quantization"),
        ("mass_drift_per_time", "energy_drift_per_time"),
    ),
    TableSpec(
        "Modulation and Scal",
        ("construct",),
        (
            "mod_bound_ratio_max",
            "scal_max",
            "monotonicity_fraction",
            "basin_radius",
            "distance_exponent",
            "predicted_distance_exponent",
        ),
        ("scal_max",),
    ),
    TableSpec(
        "Overlap decay",
        ("construct",),
        ("overlap_slope", "overlap_r2"),
        ("overlap_slope",),
    ),
    TableSpec(
        "Pair contraction",
        ("pair",),
        ("status", "D_max", "contraction_constant", "contraction_slack", "contraction_passed"),
        ("contraction_slack",),
    ),
    TableSpec(
        "Cauchy distances",
        ("cauchy",),
        ("t_n", "successive_l2", "decreasing"),
        ("successive_l2",),
    ),
)


def load_summary(run_dir: str) -> RunSummary:
    path = os.path.join(run_dir, config.SUMMARY_FILE)
    if not os.path.exists(path):
        logger.warning("No %s in %s", config.SUMMARY_FILE, run_dir)
        return RunSummary(run_dir, {}, complete=False)
    return RunSummary(run_dir, read_summary(path), complete=True)


def collect(run_dirs: Sequence[str]) -> list[RunSummary]:
    """Summaries of the given directories, with sweep children expanded.

    :raises EmptyReportError: If no directory is given
    """
    if not run_dirs:
        raise EmptyReportError("No run directories to report on")
    out = []
    for run_dir in run_dirs:
        summary = load_summary(run_dir)
        out.append(summary)
        children = summary.values.get("children", "")
        for child in children.split():
            out.append(load_summary(os.path.join(run_dir, child)))
    return out


def build_tables(summaries: Sequence[RunSummary]) -> list[Table]:
    """Fill every table from the runs of matching kind.

    A run whose kind is unknown (no summary) is flagged in every table.

    :raises EmptyReportError: If no summaries are given
    """
    if not summaries:
        raise EmptyReportError("No runs to report on")
    tables = []
    for spec in TABLES:
        table = Table(spec.title, ["run"] + list(spec.columns))
        for s in summaries:
            if not s.complete:
                table.incomplete.append(s.name)
                continue
            if s.kind not in spec.kinds:
                continue
            if any(not s.values.get(key) for key in spec.required):
                table.incomplete.append(s.name)
                continue
            row = {"run": s.name}
            row.update({c: s.values.get(c, "") for c in spec.columns})
            table.rows.append(row)
        if table.rows or table.incomplete:
            tables.append(table)
    return tables


def format_table(table: Table) -> str:
    """Fixed-width text rendering."""
    widths = {c: len(c) for c in table.columns}
    for row in table.rows:
        for c in table.columns:
            widths[c] = max(widths[c], len(row.get(c, "")))
    lines = [table.title, "  ".join(c.ljust(widths[c]) for c in table.columns)]
    lines.append("  ".join("-" * widths[c] for c in table.columns))
    for row in table.rows:
        lines.append("  ".join(row.get(c, "").ljust(widths[c]) for c in table.columns).rstrip())
    if table.incomplete:
        lines.append(f"incomplete: {', '.join(table.incomplete)}")
    return "\n".join(lines)


def write_tables(out_dir: str, tables: Sequence[Table]) -> list[str]:
    """One CSV per table; return the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for table in tables:
        name = table.title.lower().replace(" ", "_") + ".csv"
        path = os.path.join(out_dir, name)
        write_csv(path, table.rows, table.columns)
        paths.append(path)
    return paths
