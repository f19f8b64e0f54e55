"""Readers for the solver's on-disk formats.

Snapshot layout (little endian): magic "HESW", uint32 version, uint64 n,
float64 t, then n doubles of elevation followed by n doubles of the
velocity-trace variable.  The declared n must match the payload length
byte for byte; anything else is a corrupt file, not a best-effort parse.
"""

import csv
import struct
from pathlib import Path

import numpy as np

MAGIC = b"HESW"
VERSION = 1
_HEADER = struct.Struct("<4sIQd")

CSV_COLUMNS = ("t", "energy", "l2_eta", "h2_eta", "l2_u", "y0_U",
               "linf_eta_xx", "dtn_residual")


class FormatError(Exception):
    """An input file is not a well-formed solver output."""


def read_snapshot(path):
    """Parse one snapshot; returns (t, eta, u)."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: too short for a snapshot header")
    magic, version, n, t = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    want = _HEADER.size + 2 * 8 * n
    if len(blob) != want:
        raise FormatError(
            f"{path}: declared n={n} needs {want} bytes, file has {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f8", count=2 * n, offset=_HEADER.size)
    return float(t), flat[:n].copy(), flat[n:].copy()


def read_diagnostics(path):
    """Parse the diagnostics CSV into named column arrays."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{path}: empty file") from None
    if tuple(header) != CSV_COLUMNS:
        raise FormatError(f"{path}: unexpected header {header}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise FormatError(f"{path}:{lineno}: expected "
                              f"{len(CSV_COLUMNS)} columns")
        try:
            rows.append([float(v) for v in row])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    table = np.asarray(rows)
    return {name: table[:, i] for i, name in enumerate(CSV_COLUMNS)}


def load_run(run_dir):
    """All snapshots of a run directory, sorted by filename.

    Returns (times, etas, us) with one row per snapshot; the write side
    zero-pads indices so lexicographic order is time order.
    """
    run_dir = Path(run_dir)
    snaps = sorted(run_dir.glob("snapshot_*.bin"))
    if not snaps:
        raise FormatError(f"{run_dir}: no snapshot files")
    times, etas, us = [], [], []
    for snap in snaps:
        t, eta, u = read_snapshot(snap)
        times.append(t)
        etas.append(eta)
        us.append(u)
    n = etas[0].size
    if any(e.size != n for e in etas):
        raise FormatError(f"{run_dir}: snapshots disagree on n")
    return np.array(times), np.array(etas), np.array(us)
