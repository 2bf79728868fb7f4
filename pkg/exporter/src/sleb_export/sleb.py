"""SLEB writer: 16-byte header (magic, version, rows, dim) + f32 payload.

Kept self-contained on purpose: the file format is the only contract shared
with the scoring toolkit, so the exporter carries no import of it.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

SLEB_MAGIC = b"SLEB"
SLEB_VERSION = 1


def write_sleb(matrix: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite embedding values")
    with open(path, "wb") as fh:
        fh.write(SLEB_MAGIC)
        fh.write(struct.pack("<III", SLEB_VERSION, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())
