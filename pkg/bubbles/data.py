"""Run-directory persistence: YAML, checkpoints, CSV tables and summaries."""

from __future__ import annotations

import csv
import logging
import os
import struct
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np
import yaml

from bubbles import config
from bubbles.noise import NoisePaths
from bubbles.spectral import Field, make_grid

logger = logging.getLogger(__name__)

_CHECKPOINT_HEADER = struct.Struct("<dIId")


def read_yaml(path: str) -> dict[str, Any]:
    """Read and parse YAML file.

    :param path: Path to YAML file
    :return: Parsed YAML data as dictionary
    :raises FileNotFoundError: If file doesn't exist
    """
    with open(path) as f:
        return yaml.safe_load(f)


def write_yaml(path: str, data: dict[str, Any], header: str | None = None) -> None:
    """Write data to YAML file with optional header.

    :param path: Path to YAML file
    :param data: Data to write
    :param header: Optional header comment to prepend
    """
    with open(path, "w") as f:
        if header:
            f.write(header)
        yaml.safe_dump(data, f, default_flow_style=False, allow_unicode=True, sort_keys=False)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def write_checkpoint(path: str, t: float, f: Field) -> None:
    """Header {t, dim, N, L} followed by little-endian complex128 values."""
    grid = f.grid
    with open(path, "wb") as out:
        out.write(_CHECKPOINT_HEADER.pack(t, grid.dim, grid.points, grid.extent))
        out.write(np.ascontiguousarray(f.values).astype("<c16").tobytes())


def read_checkpoint(path: str) -> tuple[float, Field]:
    """Read a checkpoint written by write_checkpoint."""
    with open(path, "rb") as src:
        t, dim, points, extent = _CHECKPOINT_HEADER.unpack(src.read(_CHECKPOINT_HEADER.size))
        grid = make_grid(dim, extent, points)
        values = np.frombuffer(src.read(), dtype="<c16").astype(complex).reshape(grid.shape)
    return t, Field(grid, values)


def write_checkpoints(
    run_dir: str,
    times: Sequence[float],
    fields: Sequence[Field],
    subdir: str = config.CHECKPOINT_DIR,
) -> str:
    """Write every checkpoint and an index.csv; return the directory."""
    directory = os.path.join(run_dir, subdir)
    os.makedirs(directory, exist_ok=True)
    rows = []
    for i, (t, f) in enumerate(zip(times, fields)):
        name = f"ckpt-{i:04d}.bin"
        write_checkpoint(os.path.join(directory, name), t, f)
        rows.append({"index": i, "t": float(t), "file": name})
    write_csv(os.path.join(directory, config.CHECKPOINT_INDEX), rows, ["index", "t", "file"])
    logger.debug("Wrote %d checkpoints to %s", len(rows), directory)
    return directory


def read_checkpoints(directory: str) -> tuple[list[float], list[Field]]:
    """Load all checkpoints listed in a directory's index."""
    rows = read_csv(os.path.join(directory, config.CHECKPOINT_INDEX))
    times, fields = [], []
    for row in rows:
        t, f = read_checkpoint(os.path.join(directory, row["file"]))
        times.append(t)
        fields.append(f)
    return times, fields


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def format_value(value: Any) -> str:
    """repr for floats so reruns are byte-identical; blank for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str, rows: Iterable[Mapping[str, Any]], columns: Sequence[str] | None = None) -> None:
    """Write rows with a fixed column order (first row's keys by default)."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])


def read_csv(path: str) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_summary(path: str, summary: Mapping[str, Any]) -> None:
    """key = value lines in insertion order."""
    with open(path, "w") as f:
        for key, value in summary.items():
            if isinstance(value, (list, tuple, np.ndarray)):
                value = " ".join(format_value(v) for v in value)
            else:
                value = format_value(value)
            f.write(f"{key} = {value}\n")


def read_summary(path: str) -> dict[str, str]:
    out = {}
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#") or " = " not in line:
                continue
            key, value = line.split(" = ", 1)
            out[key] = value
    return out


def write_paths(path: str, paths: NoisePaths) -> None:
    """Dump t, B_1..B_N."""
    columns = ["t"] + [f"B_{k + 1}" for k in range(paths.n_modes)]
    rows = (
        dict(zip(columns, [t] + list(values))) for t, values in zip(paths.times, paths.values)
    )
    write_csv(path, rows, columns)
