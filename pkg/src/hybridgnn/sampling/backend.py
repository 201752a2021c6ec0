"""Kernel backend selection.

Hot sampling loops ship in two equivalent implementations: numba-compiled
scalar kernels and vectorized numpy. The numba path is used when numba
imports cleanly and ``HYBRIDGNN_NO_NUMBA`` is unset; both paths produce
bit-identical output for the same inputs (pinned by tests), so the flag
only trades speed.
"""

import os

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

_DISABLED = os.environ.get("HYBRIDGNN_NO_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

NUMBA_ENABLED = HAS_NUMBA and not _DISABLED


def active_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def resolve_backend(backend: str | None) -> str:
    """Validate an explicit backend choice or fall back to the active one."""
    if backend is None:
        return active_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
