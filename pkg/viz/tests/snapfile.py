"""Producer-side snapshot writer so tests can craft files byte by byte."""

import struct
from pathlib import Path

import numpy as np


def write_snapshot(path, t, eta, u):
    eta = np.asarray(eta, dtype="<f8")
    u = np.asarray(u, dtype="<f8")
    header = struct.pack("<4sIQd", b"HESW", 1, eta.size, float(t))
    Path(path).write_bytes(header + eta.tobytes() + u.tobytes())
