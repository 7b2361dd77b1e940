"""Thread-cap plumbing; must run before numpy's first import."""

import os

_BLAS_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def setup_thread_caps() -> None:
    """Propagate OODMINE_THREADS to the BLAS pools, keeping explicit settings."""
    cap = os.environ.get("OODMINE_THREADS")
    if not cap:
        return
    if not cap.isdigit() or int(cap) < 1:
        raise ValueError(f"OODMINE_THREADS must be a positive integer, got {cap!r}")
    for var in _BLAS_VARS:
        os.environ.setdefault(var, cap)


setup_thread_caps()
