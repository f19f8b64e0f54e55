"""On-disk formats: binary snapshots, diagnostics CSV, manifest, field text.

Snapshot layout (all little-endian, bit-exact round trip):

    bytes 0..3   magic "HESW"
    bytes 4..7   format version, uint32
    bytes 8..15  n, uint64
    bytes 16..23 t, float64
    then n float64 of eta, then n float64 of u

The diagnostics CSV carries 17 significant digits so a reload reproduces
every float bit for bit; the manifest is sorted-key JSON with the config
echo and a grid hash, and never embeds timestamps, so identical runs
produce identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import DiagnosticsRow

SNAPSHOT_MAGIC = b"HESW"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIQd")

CSV_HEADER = ",".join(DiagnosticsRow.FIELDS)


class FormatError(Exception):
    """A file did not match its declared format."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# snapshots

def write_snapshot(path, t: float, eta: np.ndarray, u: np.ndarray) -> None:
    eta = np.ascontiguousarray(eta, dtype="<f8")
    u = np.ascontiguousarray(u, dtype="<f8")
    if eta.ndim != 1 or eta.shape != u.shape:
        raise FormatError(
            f"snapshot fields must be equal-length 1-D arrays, "
            f"got {eta.shape} and {u.shape}")
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, eta.size, float(t))
    Path(path).write_bytes(header + eta.tobytes() + u.tobytes())


def read_snapshot(path):
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated before the snapshot header")
    magic, version, n, t = _HEADER.unpack_from(blob)
    if magic != SNAPSHOT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise FormatError(f"{path}: unsupported snapshot version {version}")
    want = _HEADER.size + 2 * 8 * n
    if len(blob) != want:
        raise FormatError(
            f"{path}: payload holds {len(blob) - _HEADER.size} bytes "
            f"but n={n} declares {want - _HEADER.size}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    return float(t), data[:n].copy(), data[n:].copy()


# ---------------------------------------------------------------------------
# diagnostics series

def write_diagnostics_csv(path, rows) -> None:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row.as_tuple()) + "\n")
    Path(path).write_text(out.getvalue())


def read_diagnostics_csv(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise FormatError(f"{path}: missing or wrong diagnostics header")
    rows = []
    for idx, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(DiagnosticsRow.FIELDS):
            raise FormatError(f"{path}:{idx}: expected "
                              f"{len(DiagnosticsRow.FIELDS)} columns")
        try:
            rows.append(DiagnosticsRow(*(float(p) for p in parts)))
        except ValueError as exc:
            raise FormatError(f"{path}:{idx}: {exc}") from exc
    return rows


# ---------------------------------------------------------------------------
# manifest and plain field files

def grid_hash(config) -> str:
    key = (f"{config.n}:{float(config.length).hex()}:"
           f"{float(config.depth).hex()}:{config.nz}")
    return hashlib.sha256(key.encode()).hexdigest()


def write_manifest(path, config) -> None:
    doc = {
        "format": "hesw-run",
        "format_version": 1,
        "code_version": __version__,
        "grid_hash": grid_hash(config),
        "config": config.to_dict(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc


def write_field_text(path, values) -> None:
    values = np.asarray(values, dtype=float).ravel()
    Path(path).write_text("\n".join(_fmt(v) for v in values) + "\n")


def read_field_text(path) -> np.ndarray:
    try:
        tokens = Path(path).read_text().split()
        return np.array([float(tok) for tok in tokens], dtype=float)
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: not a plain list of numbers: {exc}") from exc
