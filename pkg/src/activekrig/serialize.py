"""Deterministic CSV and JSON writers shared by the library and the CLI.

Floats are rendered with ``%.17g`` so a value round-trips exactly and two
runs that produce identical doubles produce byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np


def format_float(x: float) -> str:
    return "%.17g" % float(x)


def write_csv(path: str | os.PathLike, header: list[str], rows) -> None:
    """Write rows of floats (or pre-formatted strings) under a header line."""
    lines = [",".join(header)]
    for row in rows:
        cells = [c if isinstance(c, str) else format_float(c) for c in row]
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV written by :func:`write_csv`.

    Returns the header cells and a 2-D float array (possibly with zero rows).
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty CSV file: {path}")
    header = lines[0].split(",")
    data = np.array(
        [[float(c) for c in ln.split(",")] for ln in lines[1:]], dtype=float
    )
    if data.size == 0:
        data = data.reshape(0, len(header))
    return header, data


def write_json(path: str | os.PathLike, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str | os.PathLike) -> dict:
    with open(path) as fh:
        return json.load(fh)
