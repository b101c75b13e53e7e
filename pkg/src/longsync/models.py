"""Synchronization problems, synthetic corruption models and graph statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import blockmat as bm
from . import kernels
from .config import numerics
from .cycles import f_closed_form, EnumerationLimitError
from .so3 import chordal_distances, haar_sample


@dataclass
class SyncProblem:
    """Graph plus one observed relative rotation per edge.

    ``edges`` holds pairs ``i < j`` in lexicographic order and ``obs[k]`` is
    the measurement of ``R_i R_j^T`` on ``edges[k]``; the reverse direction is
    its transpose (its inverse, for general linear groups).
    """

    n: int
    edges: np.ndarray
    obs: np.ndarray
    d: int = 3
    ground_truth: np.ndarray | None = None
    true_corruption: np.ndarray | None = None
    corrupted: np.ndarray | None = None
    seed: int | None = None
    linear: bool = False
    _lookup: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.obs = np.asarray(self.obs, dtype=float).reshape(-1, self.d, self.d)
        if len(self.edges) != len(self.obs):
            raise ValueError("edges and observations differ in length")
        if len(self.edges) and (np.any(self.edges[:, 0] >= self.edges[:, 1])
                                or self.edges.max() >= self.n or self.edges.min() < 0):
            raise ValueError("edges must be pairs i < j of node ids below n")

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_index(self, i: int, j: int) -> int:
        if self._lookup is None:
            self._lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges)}
        a, b = (i, j) if i < j else (j, i)
        return self._lookup[(a, b)]

    def reverse_obs(self) -> np.ndarray:
        if self.linear:
            return np.linalg.inv(self.obs)
        return np.swapaxes(self.obs, -1, -2)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def block_stack(self) -> np.ndarray:
        s = np.zeros((self.n, self.n, self.d, self.d))
        i, j = self.edges[:, 0], self.edges[:, 1]
        s[i, j] = self.obs
        s[j, i] = self.reverse_obs()
        return s

    def block_matrix(self) -> np.ndarray:
        """Stacked ``(dn, dn)`` observation matrix, zero blocks off the edge set."""
        return bm.from_stack(self.block_stack())

    def edge_values(self, mat: np.ndarray) -> np.ndarray:
        return mat[self.edges[:, 0], self.edges[:, 1]]

    def to_matrix(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.edges[:, 0], self.edges[:, 1]] = values
        out[self.edges[:, 1], self.edges[:, 0]] = values
        return out

    def clean_obs(self) -> np.ndarray:
        if self.ground_truth is None:
            raise ValueError("problem has no ground truth")
        g = self.ground_truth
        return g[self.edges[:, 0]] @ np.swapaxes(g[self.edges[:, 1]], -1, -2)

    def subproblem(self, nodes: Iterable[int]) -> tuple["SyncProblem", np.ndarray]:
        """Induced subproblem; returns it with the original ids of its nodes."""
        nodes = np.array(sorted(set(int(v) for v in nodes)), dtype=np.int64)
        remap = -np.ones(self.n, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        keep = (remap[self.edges[:, 0]] >= 0) & (remap[self.edges[:, 1]] >= 0)
        sub = self.edge_subset(keep)
        sub.n = len(nodes)
        sub.edges = remap[sub.edges]
        if sub.ground_truth is not None:
            sub.ground_truth = sub.ground_truth[nodes]
        return sub, nodes

    def edge_subset(self, keep: np.ndarray) -> "SyncProblem":
        """Same node set, only the edges selected by the boolean mask ``keep``."""
        return SyncProblem(
            n=self.n, edges=self.edges[keep], obs=self.obs[keep], d=self.d,
            ground_truth=self.ground_truth,
            true_corruption=None if self.true_corruption is None else self.true_corruption[keep],
            corrupted=None if self.corrupted is None else self.corrupted[keep],
            seed=self.seed, linear=self.linear,
        )


def _with_truth(n, edges, obs, gt, corrupted, seed) -> SyncProblem:
    prob = SyncProblem(n=n, edges=edges, obs=obs, ground_truth=gt, corrupted=corrupted, seed=seed)
    prob.true_corruption = chordal_distances(prob.obs, prob.clean_obs()) if len(edges) else np.zeros(0)
    return prob


def _upper_pairs(n: int) -> np.ndarray:
    iu, ju = np.triu_indices(n, 1)
    return np.stack([iu, ju], axis=1)


def gen_ucm(n: int, p: float, q_g: float, seed: int) -> SyncProblem:
    """Uniform corruption model on an Erdos-Renyi graph.

    Each pair is an edge with probability ``p``; each edge is clean with
    probability ``q_g`` and otherwise replaced by an independent Haar draw.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    if not 0 < p <= 1 or not 0 <= q_g <= 1:
        raise ValueError("require 0 < p <= 1 and 0 <= q_g <= 1")
    rng = np.random.default_rng(seed)
    gt = haar_sample(rng, 3, size=n)
    pairs = _upper_pairs(n)
    edges = pairs[rng.random(len(pairs)) < p]
    clean = rng.random(len(edges)) < q_g
    obs = gt[edges[:, 0]] @ np.swapaxes(gt[edges[:, 1]], -1, -2)
    bad = np.nonzero(~clean)[0]
    if len(bad):
        obs[bad] = haar_sample(rng, 3, size=len(bad))
    return _with_truth(n, edges, obs, gt, ~clean, seed)


def bisection(n: int, seed: int) -> np.ndarray:
    """Seeded uniform split into two halves; returns a 0/1 label per node."""
    rng = np.random.default_rng([seed, 0xB1])
    labels = np.zeros(n, dtype=np.int64)
    labels[rng.permutation(n)[n // 2:]] = 1
    return labels


def gen_ubcm(n: int, p: float, q_g: float, seed: int) -> SyncProblem:
    """UCM followed by deleting all edges inside either half of a random bisection."""
    prob = gen_ucm(n, p, q_g, seed)
    side = bisection(n, seed)
    keep = side[prob.edges[:, 0]] != side[prob.edges[:, 1]]
    return prob.edge_subset(keep)


def _default_sampler(rng: np.random.Generator, clean: np.ndarray) -> np.ndarray:
    while True:
        r = haar_sample(rng)
        if chordal_distances(r, clean) > 1e-6:
            return r


def gen_adversarial(n: int, bad_edges: Iterable[tuple[int, int]], seed: int,
                    corruption_sampler: Callable | None = None,
                    edges: np.ndarray | None = None) -> SyncProblem:
    """Clean measurements except on ``bad_edges``, which get sampler-chosen rotations.

    ``corruption_sampler(rng, clean_rotation)`` must return a rotation different
    from ``clean_rotation``. The graph is complete unless ``edges`` is given.
    """
    rng = np.random.default_rng(seed)
    sampler = corruption_sampler or _default_sampler
    gt = haar_sample(rng, 3, size=n)
    edges = _upper_pairs(n) if edges is None else np.asarray(edges, dtype=np.int64)
    obs = gt[edges[:, 0]] @ np.swapaxes(gt[edges[:, 1]], -1, -2)
    lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    corrupted = np.zeros(len(edges), dtype=bool)
    for i, j in bad_edges:
        key = (min(i, j), max(i, j))
        if key not in lookup:
            raise ValueError(f"bad edge {key} is not in the graph")
        k = lookup[key]
        r = np.asarray(sampler(rng, obs[k]), dtype=float)
        if chordal_distances(r, obs[k]) <= 0:
            raise ValueError(f"sampler returned the clean rotation on edge {key}")
        obs[k] = r
        corrupted[k] = True
    return _with_truth(n, edges, obs, gt, corrupted, seed)


@dataclass
class CorruptionStats:
    lam: float
    total: np.ndarray
    good: np.ndarray
    c: int
    method: str

    @property
    def bad(self) -> np.ndarray:
        return self.total - self.good


def compute_lambda(problem: SyncProblem, c: int, method: str = "enumerate",
                   limit: int | None = None) -> CorruptionStats:
    """Largest fraction of bad simple c-cycles through any edge.

    A cycle through ``ij`` is bad when one of its other ``c - 1`` edges is
    corrupted. ``method="enumerate"`` lists the cycles; ``"closed"`` counts
    them with the closed-form operators (exact for c <= 6, any n). Edges on no
    c-cycle are left out of the maximum.
    """
    if problem.corrupted is None:
        raise ValueError("problem carries no corruption flags")
    a = problem.adjacency()
    good_adj = problem.to_matrix((~problem.corrupted).astype(float))
    if method == "enumerate":
        nm = numerics()
        if limit is None:
            limit = nm.lambda_limit_c3 if c == 3 else nm.lambda_limit_long
        if problem.n > limit:
            raise EnumerationLimitError(f"n={problem.n} exceeds the lambda enumeration limit {limit}")
        paths = kernels.enumerate_paths(a, c)
        first, last = paths[:, 0], paths[:, -1]
        on_edge = a[first, last] > 0
        paths, first, last = paths[on_edge], first[on_edge], last[on_edge]
        ok = np.ones(len(paths), dtype=bool)
        for k in range(c - 1):
            ok &= good_adj[paths[:, k], paths[:, k + 1]] > 0
        total = np.zeros((problem.n, problem.n))
        good = np.zeros((problem.n, problem.n))
        np.add.at(total, (first, last), 1.0)
        np.add.at(good, (first, last), ok.astype(float))
    elif method == "closed":
        total = np.rint(f_closed_form(a, c)) * a
        good = np.rint(f_closed_form(good_adj, c)) * a
    else:
        raise ValueError(f"unknown method {method!r}")
    i, j = problem.edges[:, 0], problem.edges[:, 1]
    tot = total[i, j]
    has = tot > 0
    lam = float(np.max((tot[has] - good[i, j][has]) / tot[has])) if has.any() else 0.0
    return CorruptionStats(lam=lam, total=total, good=good, c=c, method=method)


def jaccard_matrix(problem: SyncProblem) -> np.ndarray:
    """|N_i & N_j| / |N_i | N_j| on edges, zero elsewhere."""
    a = problem.adjacency()
    common = a @ a
    deg = a.sum(axis=1)
    union = deg[:, None] + deg[None, :] - common
    out, _ = bm.hadamard_div(common, union)
    return out * a
