"""Absolute-rotation solvers: spanning-tree initialisation, single-rotation
averaging, Geman-McClure IRLS over the graph, and spectral clustering."""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .models import SyncProblem
from .so3 import (
    exp_so3,
    from_quaternion,
    geodesic_angles,
    log_so3,
    project_to_rotations,
    to_quaternion,
)

log = logging.getLogger(__name__)


@dataclass
class RotationAssignment:
    """Per-node rotation estimates. ``solved`` marks the component that was solved."""

    rotations: np.ndarray
    solved: np.ndarray
    component: np.ndarray
    tree_edges: np.ndarray | None = None

    @property
    def n_solved(self) -> int:
        return int(self.solved.sum())


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def components(n: int, edges: np.ndarray) -> np.ndarray:
    """Connected-component label per node; labels ordered by smallest member."""
    ds = _DisjointSet(n)
    for i, j in edges:
        ds.union(int(i), int(j))
    roots = [ds.find(v) for v in range(n)]
    relabel: dict[int, int] = {}
    return np.array([relabel.setdefault(r, len(relabel)) for r in roots], dtype=np.int64)


def largest_component(n: int, edges: np.ndarray) -> np.ndarray:
    """Boolean mask of the largest component (ties go to the lowest node id)."""
    lab = components(n, edges)
    counts = np.bincount(lab)
    return lab == int(np.argmax(counts))


def maximum_spanning_tree(n: int, edges: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Kruskal on descending weight; equal weights keep edge-list order.

    Returns the indices of the chosen edges (a spanning forest).
    """
    order = np.lexsort((np.arange(len(edges)), -np.asarray(weights, dtype=float)))
    ds = _DisjointSet(n)
    chosen = [k for k in order if ds.union(int(edges[k, 0]), int(edges[k, 1]))]
    return np.array(sorted(chosen), dtype=np.int64)


def _edge_weight_vector(problem: SyncProblem, edge_weights) -> np.ndarray:
    w = np.asarray(edge_weights, dtype=float)
    if w.shape == (problem.n, problem.n):
        return problem.edge_values(w)
    if w.shape != (problem.m,):
        raise ValueError(f"edge weights of shape {w.shape} fit neither n x n nor one-per-edge")
    return w


def mst_init(problem: SyncProblem, edge_weights) -> RotationAssignment:
    """Propagate rotations along a maximum-weight spanning tree.

    The lowest-index node of the largest component is fixed to the identity
    and every other node gets ``R_i = R_ij R_j`` from its tree parent ``j``.
    """
    n = problem.n
    rot = np.tile(np.eye(3), (n, 1, 1))
    comp = components(n, problem.edges)
    solved = largest_component(n, problem.edges)
    if problem.m == 0:
        solved = np.zeros(n, dtype=bool)
        solved[0] = n > 0
        return RotationAssignment(rot, solved, comp, np.zeros(0, dtype=np.int64))
    w = _edge_weight_vector(problem, edge_weights)
    tree = maximum_spanning_tree(n, problem.edges, w)
    adj: list[list[tuple[int, int, bool]]] = [[] for _ in range(n)]
    for k in tree:
        i, j = int(problem.edges[k, 0]), int(problem.edges[k, 1])
        adj[i].append((j, k, True))
        adj[j].append((i, k, False))
    root = int(np.flatnonzero(solved)[0])
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, k, u_is_first in adj[u]:
            if seen[v]:
                continue
            r_k = problem.obs[k]
            # edge k measures R_a R_b^T for a < b
            rot[v] = r_k.T @ rot[u] if u_is_first else r_k @ rot[u]
            seen[v] = True
            queue.append(v)
    return RotationAssignment(rot, solved, comp, tree)


def random_tree_init(problem: SyncProblem, seed: int) -> RotationAssignment:
    rng = np.random.default_rng([seed, 0x7EE])
    return mst_init(problem, rng.random(problem.m))


def weighted_quat_mean(rotations, weights) -> np.ndarray:
    """Weighted chordal L2 mean of rotations through their quaternions."""
    rotations = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("weights must be nonnegative and not all zero")
    q = to_quaternion(rotations)
    ref = q[int(np.argmax(weights))]
    q = q * np.where(q @ ref < 0, -1.0, 1.0)[:, None]
    acc = (q * weights[:, None]).T @ q
    _, vecs = np.linalg.eigh(acc)
    return from_quaternion(vecs[:, -1])


def _l1_cost(rotations, r) -> float:
    return float(np.sum(geodesic_angles(rotations, r[None])))


def weiszfeld_l1_mean(rotations, init, max_iter: int = 50, eps: float = 1e-9,
                      tol: float = 1e-10, history: list | None = None) -> np.ndarray:
    """Geodesic L1 mean by Weiszfeld steps in the tangent space of the iterate.

    A step that would raise the summed angle is halved until it does not
    (at most 30 times), so the objective never increases.
    """
    rotations = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    r = np.asarray(init, dtype=float)
    cost = _l1_cost(rotations, r)
    if history is not None:
        history.append(cost)
    for _ in range(max_iter):
        v = log_so3(np.swapaxes(rotations, -1, -2) @ r[None]) * -1.0  # log(R^T R_k)
        inv = 1.0 / np.maximum(np.linalg.norm(v, axis=1), eps)
        step = (v * inv[:, None]).sum(axis=0) / inv.sum()
        scale = 1.0
        for _ in range(30):
            cand = r @ exp_so3(step * scale)
            new_cost = _l1_cost(rotations, cand)
            if new_cost <= cost + 1e-15:
                break
            scale *= 0.5
        else:
            break
        moved = np.linalg.norm(step * scale)
        r, cost = cand, new_cost
        if history is not None:
            history.append(cost)
        if moved < tol:
            break
    return r


@dataclass
class IrlsConfig:
    max_iters: int = 100
    sigma_init: float | None = None  # radians; default: median residual of the init
    sigma_decay: float = 0.9
    sigma_floor: float = math.radians(1.0)
    tol: float = 1e-10
    relaxation: float = 0.5

    def __post_init__(self):
        if self.sigma_floor <= 0:
            raise ValueError("sigma floor must be positive")


def edge_residuals(problem: SyncProblem, rotations: np.ndarray) -> np.ndarray:
    """Angle of R_i^T R_ij R_j per edge."""
    i, j = problem.edges[:, 0], problem.edges[:, 1]
    err = np.swapaxes(rotations[i], -1, -2) @ problem.obs @ rotations[j]
    return geodesic_angles(err, np.eye(3)[None])


def irls_gm(problem: SyncProblem, init: RotationAssignment, edge_weights=None,
            cfg: IrlsConfig | None = None) -> RotationAssignment:
    """Minimise sum rho_GM(angle(R_ij, R_i R_j^T)) by reweighted local averaging.

    Each outer iteration recomputes the Geman-McClure weights
    sigma^2 / (sigma^2 + theta^2)^2 (times optional prior edge weights), then
    moves every node toward the weighted tangent-space mean of its neighbours'
    predictions, all nodes at once from the previous iterate. The step is
    damped by ``cfg.relaxation`` so alternating modes on bipartite graphs decay.
    """
    cfg = cfg or IrlsConfig()
    rot = init.rotations.copy()
    solved = init.solved.copy()
    keep = solved[problem.edges[:, 0]] & solved[problem.edges[:, 1]]
    edges = problem.edges[keep]
    obs = problem.obs[keep]
    prior = np.ones(len(edges)) if edge_weights is None else \
        _edge_weight_vector(problem, edge_weights)[keep]
    if len(edges) == 0:
        return RotationAssignment(rot, solved, init.component, init.tree_edges)
    i, j = edges[:, 0], edges[:, 1]
    n = problem.n

    def tangent(r):
        e = np.swapaxes(r[i], -1, -2) @ obs @ r[j]
        return log_so3(e)

    v = tangent(rot)
    theta = np.linalg.norm(v, axis=1)
    sigma = cfg.sigma_init if cfg.sigma_init is not None else float(np.median(theta))
    sigma = max(sigma, cfg.sigma_floor)
    for it in range(cfg.max_iters):
        u = prior * sigma ** 2 / (sigma ** 2 + theta ** 2) ** 2
        num = np.zeros((n, 3))
        den = np.zeros(n)
        np.add.at(num, i, u[:, None] * v)
        np.add.at(num, j, -u[:, None] * v)
        np.add.at(den, i, u)
        np.add.at(den, j, u)
        active = solved & (den > 0)
        step = np.zeros((n, 3))
        step[active] = cfg.relaxation * num[active] / den[active, None]
        rot[active] = rot[active] @ exp_so3(step[active])
        moved = float(np.mean(np.linalg.norm(step[active], axis=1))) if active.any() else 0.0
        at_floor = sigma <= cfg.sigma_floor
        sigma = max(sigma * cfg.sigma_decay, cfg.sigma_floor)
        v = tangent(rot)
        theta = np.linalg.norm(v, axis=1)
        if at_floor and moved < cfg.tol:
            log.debug("irls converged after %d iterations", it + 1)
            break
    rot[solved] = project_to_rotations(rot[solved])
    return RotationAssignment(rot, solved, init.component, init.tree_edges)


def default_cluster_count(n: int, p: float) -> int:
    return int(round(0.6 * math.sqrt(n * p)))


def spectral_cluster(similarity: np.ndarray, K: int, seed: int = 0, n_init: int = 20) -> np.ndarray:
    """Normalised-Laplacian spectral clustering with seeded k-means++.

    Labels are renumbered in order of first appearance so the output does not
    depend on k-means' internal cluster numbering.
    """
    from sklearn.cluster import KMeans

    s = np.asarray(similarity, dtype=float)
    n = s.shape[0]
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of nodes {n}")
    if K == 1:
        return np.zeros(n, dtype=np.int64)
    deg = s.sum(axis=1)
    inv_sqrt = np.zeros(n)
    inv_sqrt[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    lap = np.eye(n) - inv_sqrt[:, None] * s * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh((lap + lap.T) / 2.0)
    emb = vecs[:, :K]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = np.divide(emb, norms, out=np.zeros_like(emb), where=norms > 0)
    km = KMeans(n_clusters=K, init="k-means++", n_init=n_init, random_state=seed % (2 ** 32))
    raw = km.fit_predict(emb)
    relabel: dict[int, int] = {}
    return np.array([relabel.setdefault(int(x), len(relabel)) for x in raw], dtype=np.int64)
