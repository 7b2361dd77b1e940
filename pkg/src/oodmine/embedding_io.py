"""Binary embedding matrices, label lists, and the cosine kernel.

The on-disk layout is the EMB1 format: a 16-byte header (magic ``EMB1``,
version u32, rows u32, dims u32, all little-endian) followed by
``rows * dims`` float32 values in row-major order.  Rows are unit vectors;
the loader renormalizes drifted rows in memory and warns when the drift
exceeds the 1e-4 exporter tolerance.

Storage is float32 throughout; every accumulation (norms, dot products)
runs in float64 so downstream softmax sums stay stable even with very
large negative-label sets.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EMB1_MAGIC = b"EMB1"
EMB1_VERSION = 1
_HEADER = struct.Struct("<4sIII")

# Rows whose norm is already within _UNIT_TOL of 1.0 are left bit-identical,
# which makes load -> save the byte-level identity on valid files.  Drift in
# (_UNIT_TOL, _WARN_TOL] is silently repaired (expected float32 truncation);
# drift beyond _WARN_TOL is repaired with a RenormalizationWarning.
_UNIT_TOL = 1e-6
_WARN_TOL = 1e-4
_ZERO_TOL = 1e-8


class EmbeddingFormatError(ValueError):
    """A file does not conform to the EMB1 layout."""


class BadMagicError(EmbeddingFormatError):
    """Leading bytes are not the EMB1 magic."""


class UnsupportedVersionError(EmbeddingFormatError):
    """Header declares a version this reader does not understand."""


class TruncatedPayloadError(EmbeddingFormatError):
    """Payload size disagrees with the header's rows * dims."""


class ZeroNormRowError(ValueError):
    """A row has (near-)zero norm and cannot be normalized."""


class NonFiniteValueError(ValueError):
    """A matrix contains NaN or Inf entries."""


class RenormalizationWarning(UserWarning):
    """Loaded rows deviated from unit norm by more than 1e-4."""


def _unit_rows(arr: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (float32 array with unit rows, max norm deviation seen).

    Rows already within _UNIT_TOL of unit norm keep their exact bits.
    """
    if not np.isfinite(arr).all():
        raise NonFiniteValueError("matrix contains NaN or Inf entries")
    out = np.ascontiguousarray(arr, dtype=np.float32)
    norms = np.linalg.norm(out.astype(np.float64), axis=1)
    if np.any(norms < _ZERO_TOL):
        bad = int(np.argmax(norms < _ZERO_TOL))
        raise ZeroNormRowError(f"row {bad} has norm {norms[bad]:.3g}, cannot normalize")
    dev = np.abs(norms - 1.0)
    max_dev = float(dev.max())
    drifted = dev > _UNIT_TOL
    if drifted.any():
        out = out.copy()
        out[drifted] = (out[drifted].astype(np.float64) / norms[drifted, None]).astype(np.float32)
    return out, max_dev


def normalize_rows(arr: np.ndarray) -> np.ndarray:
    """L2-normalize each row; rows already unit within 1e-6 are untouched."""
    out, _ = _unit_rows(np.asarray(arr))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable N x D float32 matrix whose rows are L2-unit vectors."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {self.data.shape}")
        n, d = self.data.shape
        if n < 1:
            raise ValueError("matrix needs at least one row")
        if d < 2:
            raise ValueError(f"dims must be >= 2, got {d}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        norms = np.linalg.norm(data.astype(np.float64), axis=1)
        # 2e-6 leaves headroom over the 1e-6 no-rewrite band plus float32
        # rounding; anything further off must go through from_array.
        if np.any(np.abs(norms - 1.0) > 2e-6):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(
                f"row {bad} has norm {norms[bad]:.8f}; use from_array to renormalize"
            )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EmbeddingMatrix":
        """Build from any 2-D numeric array, renormalizing rows as needed."""
        return cls(normalize_rows(arr))


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read an EMB1 file, renormalizing drifted rows in memory.

    Raises BadMagicError, UnsupportedVersionError, TruncatedPayloadError,
    ZeroNormRowError, or NonFiniteValueError for the corresponding defect;
    warns with RenormalizationWarning when row norms drift beyond 1e-4.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != EMB1_MAGIC:
        raise BadMagicError(f"{path}: not an EMB1 file")
    if len(raw) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: header truncated at {len(raw)} bytes")
    _, version, rows, dims = _HEADER.unpack_from(raw)
    if version != EMB1_VERSION:
        raise UnsupportedVersionError(f"{path}: version {version} unsupported")
    if rows < 1 or dims < 2:
        raise EmbeddingFormatError(f"{path}: invalid shape {rows}x{dims} in header")
    expected = _HEADER.size + rows * dims * 4
    if len(raw) != expected:
        raise TruncatedPayloadError(
            f"{path}: expected {expected} bytes for {rows}x{dims}, found {len(raw)}"
        )
    arr = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dims)
    unit, max_dev = _unit_rows(arr)
    if max_dev > _WARN_TOL:
        warnings.warn(
            f"{path}: row norms drift up to {max_dev:.3g} from 1.0; renormalized",
            RenormalizationWarning,
            stacklevel=2,
        )
    unit.setflags(write=False)
    return EmbeddingMatrix(unit)


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write an EMB1 file; loading it back reproduces the payload bit-for-bit."""
    header = _HEADER.pack(EMB1_MAGIC, EMB1_VERSION, matrix.rows, matrix.dims)
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def cosine_sim(a: EmbeddingMatrix, b: EmbeddingMatrix) -> np.ndarray:
    """All-pairs cosine similarity, shape (a.rows, b.rows), float64.

    Rows are unit vectors, so this is a plain inner product accumulated
    in float64.
    """
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return a.data.astype(np.float64) @ b.data.astype(np.float64).T


def load_labels(path: str | Path) -> list[str]:
    """Read a UTF-8 label file, one label per line, LF-terminated."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: empty label file")
    return lines


def save_labels(labels: list[str] | tuple[str, ...], path: str | Path) -> None:
    if not labels:
        raise ValueError("refusing to write an empty label file")
    for i, label in enumerate(labels):
        if "\n" in label:
            raise ValueError(f"label {i} contains a newline")
    Path(path).write_text("".join(s + "\n" for s in labels), encoding="utf-8")
