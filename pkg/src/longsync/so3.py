"""Rotations in SO(d), with the quaternion and tangent-space helpers for d=3.

Rotations are plain ``(d, d)`` float arrays (stacks are ``(..., d, d)``).
Quaternions are ``(w, x, y, z)`` arrays in a canonical sign: ``w >= 0``,
ties broken by the first nonzero of ``x, y, z`` being positive.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation as _SciRot

from .config import numerics


class RotationError(ValueError):
    pass


def is_rotation(m, tol: float | None = None) -> bool:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    nm = numerics()
    tol_o = nm.orthogonality_tol if tol is None else tol
    tol_d = nm.determinant_tol if tol is None else tol
    d = m.shape[0]
    if np.linalg.norm(m.T @ m - np.eye(d)) > tol_o:
        return False
    return abs(np.linalg.det(m) - 1.0) <= tol_d


def check_rotation(m, name: str = "rotation") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not is_rotation(m):
        raise RotationError(f"{name} is not a valid rotation matrix")
    return m


def chordal_distance(r1, r2) -> float:
    """sqrt(1 - <r1, r2>/d); bi-invariant.

    Evaluated as ||r1 - r2||_F / sqrt(2d), the same value on rotations, which
    stays accurate for nearly equal arguments.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != r2.shape:
        raise RotationError(f"dimension mismatch: {r1.shape} vs {r2.shape}")
    return float(chordal_distances(r1, r2))


def chordal_distances(a, b) -> np.ndarray:
    """Vectorised :func:`chordal_distance` over stacks of shape ``(..., d, d)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a.shape[-1]
    return np.linalg.norm(a - b, axis=(-2, -1)) / np.sqrt(2.0 * d)


def geodesic_angle(r1, r2) -> float:
    """Angle in radians of ``r1.T @ r2``; d=3 only."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != (3, 3) or r2.shape != (3, 3):
        raise RotationError("geodesic_angle is defined for d=3 only")
    return float(geodesic_angles(r1, r2))


def _angle_of(m: np.ndarray) -> np.ndarray:
    # atan2 of the skew part and the trace keeps full precision near 0 and pi,
    # where arccos of the trace alone loses half the digits
    cos = (np.trace(m, axis1=-2, axis2=-1) - 1.0) / 2.0
    skew = np.stack([m[..., 2, 1] - m[..., 1, 2],
                     m[..., 0, 2] - m[..., 2, 0],
                     m[..., 1, 0] - m[..., 0, 1]], axis=-1)
    sin = np.linalg.norm(skew, axis=-1) / 2.0
    return np.arctan2(sin, cos)


def geodesic_angles(a, b) -> np.ndarray:
    """Vectorised :func:`geodesic_angle` over stacks of ``3 x 3`` matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _angle_of(np.swapaxes(a, -1, -2) @ b)


def rotation_angle(r) -> np.ndarray:
    return _angle_of(np.asarray(r, dtype=float))


def haar_sample(rng: np.random.Generator, d: int = 3, size: int | None = None) -> np.ndarray:
    """Haar-distributed rotation(s) via QR of a Gaussian matrix.

    The QR factor is made unique by forcing a positive R-diagonal, which gives
    Haar measure on O(d); reflections are then mapped to SO(d) by negating
    the first column.
    """
    shape = (1 if size is None else size, d, d)
    g = rng.standard_normal(shape)
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    q = q * signs[:, None, :]
    neg = np.linalg.det(q) < 0
    q[neg, :, 0] *= -1.0
    return q[0] if size is None else q


def project_to_rotation(m) -> np.ndarray:
    """Nearest rotation in Frobenius norm (polar factor with det correction)."""
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m)
    if s[-1] <= 1e-12 * max(s[0], 1e-300):
        raise RotationError("cannot project a rank-deficient matrix")
    if np.linalg.det(u @ vt) < 0:
        u = u.copy()
        u[:, -1] *= -1.0
    return u @ vt


def project_to_rotations(m) -> np.ndarray:
    """Batch :func:`project_to_rotation` without the rank check."""
    m = np.asarray(m, dtype=float)
    u, _, vt = np.linalg.svd(m)
    det = np.linalg.det(u @ vt)
    u = u.copy()
    u[det < 0, :, -1] *= -1.0
    return u @ vt


def canonical_quaternion(q) -> np.ndarray:
    q = np.array(q, dtype=float)
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    flat = q.reshape(-1, 4)
    lead = np.argmax(flat != 0.0, axis=1)
    sign = np.sign(flat[np.arange(len(flat)), lead])
    sign[sign == 0] = 1.0
    return (flat * sign[:, None]).reshape(q.shape)


def to_quaternion(r) -> np.ndarray:
    """Rotation(s) to canonical ``(w, x, y, z)``."""
    r = np.asarray(r, dtype=float)
    xyzw = _SciRot.from_matrix(r).as_quat()
    wxyz = np.concatenate([xyzw[..., 3:], xyzw[..., :3]], axis=-1)
    return canonical_quaternion(wxyz)


def from_quaternion(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    xyzw = np.concatenate([q[..., 1:], q[..., :1]], axis=-1)
    return _SciRot.from_quat(xyzw).as_matrix()


def log_so3(r) -> np.ndarray:
    """Rotation vector(s) of ``r`` (axis times angle)."""
    return _SciRot.from_matrix(np.asarray(r, dtype=float)).as_rotvec()


def exp_so3(v) -> np.ndarray:
    return _SciRot.from_rotvec(np.asarray(v, dtype=float)).as_matrix()


def axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return exp_so3(axis / np.linalg.norm(axis) * angle)
