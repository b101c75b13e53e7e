"""Dense block-matrix algebra on ``(dn, dn)`` arrays made of ``d x d`` blocks.

Weight matrices are ``(n, n)`` arrays. Block matrices are stored as one
contiguous ``(d*n, d*n)`` array so products go straight to BLAS; blockwise
operations work on the free ``(n, d, n, d)`` view.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


def _block_count(x: np.ndarray, d: int) -> int:
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] % d:
        raise ShapeError(f"expected a square (dn, dn) array with d={d}, got {x.shape}")
    return x.shape[0] // d


def blocks(x: np.ndarray, d: int) -> np.ndarray:
    """View of ``x`` indexed as ``[i, :, j, :]`` for block ``(i, j)``."""
    n = _block_count(x, d)
    return x.reshape(n, d, n, d)


def to_stack(x: np.ndarray, d: int) -> np.ndarray:
    """Copy into ``(n, n, d, d)`` layout."""
    return np.ascontiguousarray(blocks(x, d).transpose(0, 2, 1, 3))


def from_stack(s: np.ndarray) -> np.ndarray:
    n, _, d, _ = s.shape
    return np.ascontiguousarray(s.transpose(0, 2, 1, 3)).reshape(n * d, n * d)


def get_block(x: np.ndarray, d: int, i: int, j: int) -> np.ndarray:
    return x[i * d:(i + 1) * d, j * d:(j + 1) * d]


def lift_hadamard(w: np.ndarray, x: np.ndarray, d: int) -> np.ndarray:
    """``(w kron 1_d) * x``: block (i, j) scaled by ``w[i, j]``."""
    n = _block_count(x, d)
    if w.shape != (n, n):
        raise ShapeError(f"weight matrix {w.shape} does not match {n} blocks")
    return (blocks(x, d) * w[:, None, :, None]).reshape(x.shape)


def block_inner(x: np.ndarray, y: np.ndarray, d: int) -> np.ndarray:
    """Frobenius inner product of corresponding blocks, as an ``(n, n)`` matrix."""
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {y.shape}")
    return np.einsum("iajb,iajb->ij", blocks(x, d), blocks(y, d))


def block_power(x: np.ndarray, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("block_power needs k >= 1")
    out = x
    for _ in range(k - 1):
        out = out @ x
    return out


def diag_extract(w: np.ndarray) -> np.ndarray:
    return np.diag(np.diag(w))


def block_diag_extract(x: np.ndarray, d: int) -> np.ndarray:
    n = _block_count(x, d)
    out = np.zeros_like(x)
    src = blocks(x, d)
    dst = blocks(out, d)
    idx = np.arange(n)
    dst[idx, :, idx, :] = src[idx, :, idx, :]
    return out


def scalar_blocks(v: np.ndarray, d: int) -> np.ndarray:
    """Block-diagonal matrix with ``v[i] * I_d`` on the diagonal."""
    return np.kron(np.diag(v), np.eye(d))


def block_swap(x: np.ndarray, d: int) -> np.ndarray:
    """Move block (j, i) to position (i, j); blocks themselves are not transposed."""
    n = _block_count(x, d)
    return np.ascontiguousarray(blocks(x, d).transpose(2, 1, 0, 3)).reshape(n * d, n * d)


def block_hadamard(*xs: np.ndarray, d: int) -> np.ndarray:
    """Blockwise matrix product: block (i, j) = x1(i,j) @ x2(i,j) @ ..."""
    out = blocks(xs[0], d)
    for x in xs[1:]:
        out = np.einsum("iajb,ibjc->iajc", out, blocks(x, d))
    return np.ascontiguousarray(out).reshape(xs[0].shape)


def kron_lift(x: np.ndarray, d: int) -> np.ndarray:
    """Block matrix with blocks ``x(i,j) kron x(i,j)`` of size ``d^2``.

    Products respect the lift, ``(A kron A)(B kron B) = AB kron AB``, so walk
    sums of the lifted matrix are lifts of walk sums term by term.
    """
    n = _block_count(x, d)
    b = blocks(x, d)
    k = np.einsum("iajb,icjd->iacjbd", b, b)
    return k.reshape(n * d * d, n * d * d)


def hadamard_mul(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {y.shape}")
    return x * y


def hadamard_pow(x: np.ndarray, k: float) -> np.ndarray:
    return np.power(x, k)


def hadamard_div(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise ``x / y`` with zero where ``y == 0``.

    Returns the quotient and the boolean mask of zero-denominator entries, so
    callers can tell "no support" apart from a genuine zero.
    """
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {y.shape}")
    zero = y == 0
    out = np.zeros(np.broadcast(x, y).shape, dtype=float)
    np.divide(x, y, out=out, where=~zero)
    return out, zero
