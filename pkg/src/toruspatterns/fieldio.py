"""On-disk formats: CSV and binary field dumps, JSON sidecars.

All writers format floats with shortest round-trip repr or %.17g so that
identical inputs produce bit-identical files on one machine.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .operators import PeriodicGrid

__all__ = [
    "field_to_csv",
    "write_field_binary",
    "read_field_binary",
    "write_json",
    "write_text",
]

MAGIC = b"TPF1"


def field_to_csv(u: np.ndarray, grid: PeriodicGrid) -> str:
    """Row-major (phi outer, theta inner) dump with angle columns."""
    lines = ["phi,theta,value"]
    phi, theta = grid.phi, grid.theta
    for i in range(grid.n_phi):
        p = phi[i]
        row = u[i]
        for j in range(grid.n_theta):
            lines.append(f"{p:.17g},{theta[j]:.17g},{row[j]:.17g}")
    return "\n".join(lines) + "\n"


def write_field_binary(path, u: np.ndarray, grid: PeriodicGrid) -> None:
    """16-byte header (magic, two little-endian uint32 dims, 4 pad bytes),
    then float64 values in C order."""
    header = MAGIC + struct.pack("<II", grid.n_phi, grid.n_theta) + b"\x00" * 4
    data = np.ascontiguousarray(u, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_field_binary(path):
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != MAGIC:
            raise ValueError(f"{path}: not a field dump (bad magic)")
        n_phi, n_theta = struct.unpack("<II", header[4:12])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n_phi * n_theta:
        raise ValueError(f"{path}: payload size mismatch")
    return data.reshape(n_phi, n_theta).copy(), (int(n_phi), int(n_theta))


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_text(path, text: str) -> None:
    Path(path).write_text(text)
