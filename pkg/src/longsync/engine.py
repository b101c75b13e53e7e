"""LongSync iterations, the explicit-enumeration CEMP reference and the
linear-group variant.

Every variant alternates two updates on ``n x n`` matrices::

    S <- corruption estimates from cycles weighted by W
    W <- A * exp(-beta_t * S)

starting from ``W = A``. LongSync computes the first update with the closed
forms of :mod:`longsync.cycles`; ``cemp_naive`` lists cycles explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import blockmat as bm
from . import kernels
from .config import numerics
from .cycles import (
    EnumerationLimitError,
    f_closed_form,
    g_closed_form,
    _check_length,
)
from .models import SyncProblem

POLICIES = ("one", "hold")


def default_betas(T: int = 10, cap: float = 20.0) -> list[float]:
    """beta_t = min(2^t, cap) for t = 0..T."""
    return [float(min(2.0 ** t, cap)) for t in range(T + 1)]


def geometric_betas(beta0: float, r: float, T: int) -> list[float]:
    return [beta0 * r ** t for t in range(T + 1)]


@dataclass
class LongSyncConfig:
    """Cycle length(s), reweighting schedule and the starved-edge policy.

    ``lengths`` maps cycle length to its convex weight; when omitted the single
    length ``c`` is used. ``policy="one"`` sets the corruption of an edge with
    no supporting cycle to 1; ``"hold"`` keeps its previous estimate.
    """

    c: int = 3
    T: int = 10
    betas: Sequence[float] | None = None
    beta_cap: float = 20.0
    lengths: Mapping[int, float] | None = None
    policy: str = "one"
    keep_trace: bool = False

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.lengths is not None:
            lam = dict(self.lengths)
            if any(v < 0 for v in lam.values()):
                raise ValueError("length weights must be nonnegative")
            if not math.isclose(sum(lam.values()), 1.0, rel_tol=0, abs_tol=1e-12):
                raise ValueError(f"length weights must sum to 1, got {sum(lam.values())}")
            for c in lam:
                _check_length(c)
            self.lengths = lam
        else:
            _check_length(self.c)
        if self.betas is not None and len(self.betas) < self.T + 1:
            raise ValueError(f"need {self.T + 1} beta values, got {len(self.betas)}")

    def schedule(self) -> list[float]:
        if self.betas is not None:
            return [float(b) for b in self.betas[: self.T + 1]]
        return default_betas(self.T, self.beta_cap)

    def weights(self) -> dict[int, float]:
        if self.lengths is not None:
            return {c: v for c, v in sorted(self.lengths.items()) if v > 0}
        return {self.c: 1.0}


@dataclass
class LongSyncState:
    S: np.ndarray
    W: np.ndarray
    t: int
    starved: np.ndarray
    trace: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def edge_corruption(self, problem: SyncProblem) -> np.ndarray:
        return problem.edge_values(self.S)

    def edge_weights(self, problem: SyncProblem) -> np.ndarray:
        return problem.edge_values(self.W)


def _reweight(a: np.ndarray, s: np.ndarray, beta: float) -> np.ndarray:
    w = a * np.exp(-beta * s)
    w[w < numerics().weight_floor] = 0.0
    return w


def _apply_policy(s_new, starved, s_prev, policy):
    if policy == "one" or s_prev is None:
        s_new[starved] = 1.0
    else:
        s_new[starved] = s_prev[starved]
    return s_new


def _iterate(problem: SyncProblem, cfg: LongSyncConfig, update) -> LongSyncState:
    if problem.m == 0:
        raise ValueError("graph has no edges")
    a = problem.adjacency()
    w = a.copy()
    s = None
    trace = []
    starved = np.zeros_like(a, dtype=bool)
    for t, beta in enumerate(cfg.schedule()):
        s_new, starved = update(w)
        # rounding in the block products breaks exact symmetry; mirror the upper triangle
        s_new = np.triu(s_new, 1)
        s_new = s_new + s_new.T
        starved = np.triu(starved, 1)
        starved = starved | starved.T
        s_new = _apply_policy(s_new * a, starved & (a > 0), s, cfg.policy)
        s = s_new
        w = _reweight(a, s, beta)
        if cfg.keep_trace:
            trace.append((s.copy(), w.copy()))
    return LongSyncState(S=s, W=w, t=cfg.T, starved=starved & (a > 0), trace=trace)


def longsync_run(problem: SyncProblem, cfg: LongSyncConfig) -> LongSyncState:
    """Corruption levels from weighted quadratic averages of cycle inconsistencies.

    Per iteration, with ``h_c = g_c(W, R) / (d f_c(W))`` blockwise,
    ``S = sqrt(A - <sum_c lambda_c h_c, R>_block * A)``. Lengths with no
    supporting cycle on an edge drop out of that edge's combination and the
    remaining weights are renormalised; an edge with no support at all is
    starved and handled by ``cfg.policy``.
    """
    a = problem.adjacency()
    r = problem.block_matrix()
    d = problem.d
    lam = cfg.weights()

    def update(w):
        acc = np.zeros_like(a)
        mass = np.zeros_like(a)
        for c, weight in lam.items():
            f = f_closed_form(w, c)
            g, _ = g_closed_form(w, r, c, d)
            inner, empty = bm.hadamard_div(bm.block_inner(g, r, d), d * f)
            acc += weight * inner
            mass += weight * ~empty
        agreement, starved = bm.hadamard_div(acc, mass)
        # 1 - <h, R> lies in [0, 2]; clip rounding before the square root
        return np.sqrt(np.clip(a - agreement * a, 0.0, 2.0)), starved

    return _iterate(problem, cfg, update)


def longsync_multilength(problem: SyncProblem, cfg: LongSyncConfig) -> LongSyncState:
    if cfg.lengths is None:
        raise ValueError("multi-length run needs cfg.lengths")
    return longsync_run(problem, cfg)


class CycleTable:
    """Explicit list of the simple c-cycles through every edge, with d_L.

    ``paths[k]`` is a simple path ``i -> ... -> j`` whose endpoints form an
    edge; closing it gives a c-cycle through ``ij``.
    """

    def __init__(self, problem: SyncProblem, c: int, limit: int | None = None):
        limit = numerics().enumeration_limit if limit is None else limit
        if problem.n > limit:
            raise EnumerationLimitError(f"n={problem.n} exceeds the enumeration limit {limit}")
        a = problem.adjacency()
        paths = kernels.enumerate_paths(a, c)
        paths = paths[a[paths[:, 0], paths[:, -1]] > 0]
        stack = problem.block_stack()
        prod = stack[paths[:, 0], paths[:, 1]]
        for k in range(1, c - 1):
            prod = prod @ stack[paths[:, k], paths[:, k + 1]]
        direct = stack[paths[:, 0], paths[:, -1]]
        d = problem.d
        self.paths = paths
        self.dist_sq = np.maximum(0.0, 1.0 - np.einsum("kab,kab->k", prod, direct) / d)
        self.n = problem.n
        self.c = c

    def weights(self, w: np.ndarray) -> np.ndarray:
        out = np.ones(len(self.paths))
        for k in range(self.c - 1):
            out *= w[self.paths[:, k], self.paths[:, k + 1]]
        return out

    def reduce(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        np.add.at(out, (self.paths[:, 0], self.paths[:, -1]), values)
        return out


class _DenseTriangles:
    """3-cycle inconsistencies for every (i, k, j) held densely; any n."""

    def __init__(self, problem: SyncProblem):
        stack = problem.block_stack()
        n, d = problem.n, problem.d
        dist_sq = np.empty((n, n, n))
        for i in range(n):
            through = np.einsum("kae,kjeb->kjab", stack[i], stack)
            dist_sq[i] = 1.0 - np.einsum("kjab,jab->kj", through, stack[i]) / d
        self.dist_sq = np.maximum(dist_sq, 0.0)

    def sums(self, w, values):
        num = np.einsum("ik,kj,ikj->ij", w, w, values, optimize=True)
        den = w @ w
        return num, den


def cemp_naive(problem: SyncProblem, cfg: LongSyncConfig, use_quadratic_mean: bool = False,
               limit: int | None = None) -> LongSyncState:
    """Reference CEMP with the chordal metric over explicitly listed cycles.

    With ``use_quadratic_mean`` the estimate is sqrt(sum w_L d_L^2 / sum w_L),
    which is what :func:`longsync_run` computes in closed form; otherwise the
    plain weighted mean sum w_L d_L / sum w_L. For c = 3 the cycles are held
    densely and ``n`` is unrestricted.
    """
    if cfg.lengths is not None:
        raise ValueError("cemp_naive takes a single cycle length")
    c = cfg.c
    a = problem.adjacency()
    if c == 3 and problem.n > (numerics().enumeration_limit if limit is None else limit):
        tri = _DenseTriangles(problem)
        values = tri.dist_sq if use_quadratic_mean else np.sqrt(tri.dist_sq)

        def update(w):
            num, den = tri.sums(w, values)
            mean, starved = bm.hadamard_div(num, den)
            return (np.sqrt(mean) if use_quadratic_mean else mean), starved
    else:
        table = CycleTable(problem, c, limit)
        values = table.dist_sq if use_quadratic_mean else np.sqrt(table.dist_sq)

        def update(w):
            wl = table.weights(w)
            mean, starved = bm.hadamard_div(table.reduce(wl * values), table.reduce(wl))
            return (np.sqrt(mean) if use_quadratic_mean else mean), starved

    return _iterate(problem, cfg, update)


def longsync_linear_group(problem: SyncProblem, cfg: LongSyncConfig,
                          second_moment: str = "exact") -> LongSyncState:
    """LongSync for invertible-matrix measurements with d(G1, G2) = ||G1 - G2||_F.

    The per-edge estimate is the weighted quadratic mean of ||G_L - G_ij||_F,
    expanded as ``(sum w_L ||G_L||^2 - 2 <g_c(W, G), G_ij>) / f_c(W) + ||G_ij||^2``.
    The first sum is read off ``g_c`` of the Kronecker-lifted measurements
    (``||G||_F^2`` is the trace-like contraction of ``G kron G``).

    ``second_moment="sqrt-weight"`` replaces that sum by
    ``<g_c(sqrt W, G), g_c(sqrt W, G)>``; it is kept for comparison only, since
    it adds cross terms between different cycles.
    """
    if cfg.lengths is not None:
        raise ValueError("linear-group variant takes a single cycle length")
    if second_moment not in ("exact", "sqrt-weight"):
        raise ValueError(f"unknown second_moment {second_moment!r}")
    dets = np.linalg.det(problem.obs)
    if np.any(np.abs(dets) < 1e-12):
        raise np.linalg.LinAlgError("singular measurement block")
    c, d, n = cfg.c, problem.d, problem.n
    g_mat = problem.block_matrix()
    lifted = bm.kron_lift(g_mat, d)
    self_sq = bm.block_inner(g_mat, g_mat, d)
    diag_sel = np.zeros((d * d, d * d))
    idx = np.arange(d)
    # picks (a,a),(b,b) entries of a lifted block: sum_ab G[a,b]^2
    diag_sel[(idx[:, None] * d + idx[:, None]), (idx[None, :] * d + idx[None, :])] = 1.0

    def update(w):
        f = f_closed_form(w, c)
        g, _ = g_closed_form(w, g_mat, c, d)
        cross = bm.block_inner(g, g_mat, d)
        if second_moment == "exact":
            m2, _ = g_closed_form(w, lifted, c, d * d)
            moment = np.einsum("iajb,ab->ij", bm.blocks(m2, d * d), diag_sel)
        else:
            gs, _ = g_closed_form(np.sqrt(w), g_mat, c, d)
            moment = bm.block_inner(gs, gs, d)
        mean, starved = bm.hadamard_div(moment - 2.0 * cross, f)
        return np.sqrt(np.maximum(mean + self_sq, 0.0)), starved

    return _iterate(problem, cfg, update)
