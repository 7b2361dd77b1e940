"""Shared test helpers.

emb1_bytes is an independent byte-level writer for the embedding file
format so that reader tests never depend on the library's own serializer.
"""

import struct

import numpy as np


def random_unit(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n random unit vectors in R^d, float64."""
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def emb1_bytes(arr: np.ndarray, magic: bytes = b"EMB1", version: int = 1) -> bytes:
    arr = np.asarray(arr, dtype="<f4")
    header = magic + struct.pack("<III", version, arr.shape[0], arr.shape[1])
    return header + arr.tobytes()


# One line per acceptance criterion, surfaced after the run so that
# pytest's output capture cannot swallow the verdicts.
_CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.line(line)
