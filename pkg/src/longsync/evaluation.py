"""Gauge alignment and per-node error metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .so3 import geodesic_angles, project_to_rotation


@dataclass
class ErrorSummary:
    mean_deg: float
    median_deg: float
    per_node_deg: np.ndarray
    n_evaluated: int


def _polar(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vt)) or 1.0])
    return u @ fix @ vt


def _l1_objective(est, truth, r) -> float:
    return float(np.sum(np.linalg.norm(est @ r - truth, axis=(1, 2))))


def align(estimates, truth, max_iter: int = 30, eps: float = 1e-9,
          history: list | None = None) -> np.ndarray:
    """Global rotation ``R`` minimising ``sum_i ||est_i R - truth_i||_F``.

    Starts from the least-squares solution (polar factor of sum est_i^T truth_i)
    and reweights by ``1 / max(residual, eps)``. An iterate that would raise
    the objective beyond rounding is rejected and the loop stops, so the
    objective never grows. Near the optimum the objective is flat to rounding
    while the iterate still moves, so convergence is judged on the iterate.
    """
    est = np.asarray(estimates, dtype=float).reshape(-1, 3, 3)
    truth = np.asarray(truth, dtype=float).reshape(-1, 3, 3)
    if len(est) == 0 or len(est) != len(truth):
        raise ValueError("alignment needs matching, nonempty estimate and truth sets")
    cross = np.swapaxes(est, -1, -2) @ truth
    r = _polar(cross.sum(axis=0))
    cost = _l1_objective(est, truth, r)
    if history is not None:
        history.append(cost)
    for _ in range(max_iter):
        res = np.linalg.norm(est @ r - truth, axis=(1, 2))
        wts = 1.0 / np.maximum(res, eps)
        cand = _polar(np.einsum("k,kab->ab", wts, cross))
        new_cost = _l1_objective(est, truth, cand)
        if new_cost > cost + 1e-13 * max(cost, 1.0):
            break
        done = np.linalg.norm(cand - r) < 1e-13
        r, cost = cand, new_cost
        if history is not None:
            history.append(cost)
        if done:
            break
    return project_to_rotation(r)


def error_summary(estimates, truth, r_align) -> ErrorSummary:
    """Per-node angle of ``est_i R_align`` against ``truth_i``, in degrees."""
    est = np.asarray(estimates, dtype=float).reshape(-1, 3, 3)
    truth = np.asarray(truth, dtype=float).reshape(-1, 3, 3)
    per = np.degrees(geodesic_angles(est @ r_align, truth))
    per = np.minimum(per, 180.0)
    if len(per) == 0:
        return ErrorSummary(float("nan"), float("nan"), per, 0)
    return ErrorSummary(float(per.mean()), float(np.median(per)), per, len(per))


def evaluate(rotations, truth, mask=None) -> ErrorSummary:
    """Align on the nodes in ``mask`` (default all) and summarise their errors."""
    rotations = np.asarray(rotations, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if mask is not None:
        rotations, truth = rotations[mask], truth[mask]
    r = align(rotations, truth)
    return error_summary(rotations, truth, r)
