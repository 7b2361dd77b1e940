"""Writer for the EMB1 unit-row embedding format.

Layout (little-endian): magic "EMB1", u32 version = 1, u32 rows,
u32 dims, then rows x dims float32 row-major.  Rows are renormalized in
float64 before the float32 cast, so readers that check unit norms at
1e-4 (or even 1e-6) accept the output without warnings.

Deliberately self-contained: the exporter talks to the consumer side
only through this file format.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
VERSION = 1


def write_embeddings(array: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"need a nonempty 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("matrix contains NaN or Inf entries")
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    if np.any(norms < 1e-8):
        bad = int(np.argmax(norms[:, 0] < 1e-8))
        raise ValueError(f"row {bad} has near-zero norm, cannot normalize")
    out = np.ascontiguousarray(arr / norms, dtype="<f4")
    header = MAGIC + struct.pack("<III", VERSION, out.shape[0], out.shape[1])
    Path(path).write_bytes(header + out.tobytes())
