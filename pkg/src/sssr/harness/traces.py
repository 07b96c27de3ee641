"""
Reading and writing multi-channel traces as CSV.

One row per sample, one column per channel. A first row in which no cell
parses as a number is taken as a header.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import ConfigError
from ..signal_model import Dirac, ModelKind, MultiChannelFrame

__all__ = ["TraceParseError", "read_traces", "ingest_traces", "write_traces"]


class TraceParseError(ConfigError):
    """Malformed trace file; the message names the offending row and column."""


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_traces(path) -> tuple[np.ndarray, Optional[list]]:
    """Parse a trace CSV into an (M, N) array plus the header (or None)."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise TraceParseError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise TraceParseError(f"{path}: no data rows")
    header = None
    first = 1
    if not any(_is_number(c.strip()) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first = 2
    if not rows:
        raise TraceParseError(f"{path}: header but no data rows")
    width = len(header) if header is not None else len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        lineno = i + first
        if len(row) != width:
            raise TraceParseError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell.strip())
            except ValueError:
                raise TraceParseError(f"{path}: row {lineno}, column {j + 1}: {cell!r} is not a number") from None
    if not np.all(np.isfinite(data)):
        i, j = np.argwhere(~np.isfinite(data))[0]
        raise TraceParseError(f"{path}: row {i + first}, column {j + 1}: non-finite value")
    return data.T.copy(), header


def ingest_traces(
    path,
    baseline_quantile: Optional[float] = 0.1,
    model: Optional[ModelKind] = None,
) -> MultiChannelFrame:
    """
    Load traces and subtract a per-channel baseline.

    The baseline of each trace is its ``baseline_quantile`` quantile (10th
    percentile by default); pass None to keep the raw values.

    Raises
    ------
    TraceParseError
        On unreadable files, ragged rows or non-numeric cells, with the
        row and column of the problem.
    """
    channels, _ = read_traces(path)
    if channels.shape[0] < 2:
        raise TraceParseError(f"{path}: need at least two trace columns, found {channels.shape[0]}")
    if baseline_quantile is not None:
        if not 0 <= baseline_quantile <= 1:
            raise ValueError("baseline_quantile must lie in [0, 1]")
        channels = channels - np.quantile(channels, baseline_quantile, axis=1, keepdims=True)
    return MultiChannelFrame(channels=channels, model=model or Dirac(), truth=None)


def write_traces(path, channels: ArrayLike, header: Optional[Sequence[str]] = None) -> None:
    """Write an (M, N) array as CSV with round-trip exact ``%.17g`` values."""
    x = np.asarray(channels, dtype=float)
    if x.ndim != 2:
        raise ValueError("channels must be 2-D (M, N)")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            if len(header) != x.shape[0]:
                raise ValueError("header needs one name per channel")
            w.writerow(header)
        for row in x.T:
            w.writerow(["%.17g" % v for v in row])
