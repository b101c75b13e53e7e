"""Backend selection for the simple-path kernels.

The compiled extension is used when it imports; otherwise the numpy version.
Set ``LONGSYNC_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _paths_py

_ext = None
if os.environ.get("LONGSYNC_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._ext import paths as _ext  # type: ignore[no-redef]
    except ImportError:
        _ext = None

BACKEND = "compiled" if _ext is not None else "python"


def has_compiled() -> bool:
    return _ext is not None


def enumerate_paths(support, c: int, backend: str | None = None) -> np.ndarray:
    s = np.ascontiguousarray(np.asarray(support) != 0, dtype=np.uint8)
    if _use_ext(backend):
        return _ext.enumerate_paths(s, int(c))
    return _paths_py.enumerate_paths(s.astype(bool), int(c))


def path_sums(w, rot, c: int, backend: str | None = None):
    """Sum over simple c-vertex paths i -> j of the edge-weight product (``f``)
    and of the weight times the ordered block product (``g``).

    ``rot`` is an ``(n, n, d, d)`` stack of blocks or ``None``.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    if rot is not None:
        rot = np.ascontiguousarray(rot, dtype=np.float64)
    if _use_ext(backend):
        return _ext.path_sums(w, rot, int(c))
    return _paths_py.path_sums(w, rot, int(c))


def _use_ext(backend: str | None) -> bool:
    if backend is None:
        return _ext is not None
    if backend == "compiled":
        if _ext is None:
            raise RuntimeError("compiled kernels are not built")
        return True
    if backend == "python":
        return False
    raise ValueError(f"unknown backend {backend!r}")
