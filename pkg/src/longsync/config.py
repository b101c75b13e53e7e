"""Process-wide numerical tolerances and the thread switch."""
from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Numerics:
    orthogonality_tol: float = 1e-9
    determinant_tol: float = 1e-9
    quaternion_norm_tol: float = 1e-12
    # weights below this are flushed to zero and routed through the starvation mask
    weight_floor: float = 1e-300
    enumeration_limit: int = 12
    lambda_limit_c3: int = 40
    lambda_limit_long: int = 14


NUMERICS = Numerics()


def numerics() -> Numerics:
    return NUMERICS


@contextmanager
def override_numerics(**changes):
    global NUMERICS
    old = NUMERICS
    NUMERICS = replace(old, **changes)
    try:
        yield NUMERICS
    finally:
        NUMERICS = old


def thread_count(default: int = 1) -> int:
    """Worker count from ``LONGSYNC_THREADS`` (falls back to ``default``)."""
    raw = os.environ.get("LONGSYNC_THREADS")
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@contextmanager
def blas_threads(n: int):
    """Limit BLAS parallelism inside the block (``n=1`` for bit-stable runs)."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=n):
        yield


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer; used to derive per-trial seeds."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(master: int, *keys: int) -> int:
    s = int(master) & 0xFFFFFFFFFFFFFFFF
    for k in keys:
        s = splitmix64(s ^ (int(k) & 0xFFFFFFFFFFFFFFFF))
    return s & 0x7FFFFFFFFFFFFFFF
