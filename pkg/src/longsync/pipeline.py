"""Distributed synchronization: partition, solve clusters, estimate
inter-cluster rotations, synchronize clusters and merge.

Cluster-local solutions satisfy ``R_hat_p ~ R_p R_k^T`` for an unknown
per-cluster rotation ``R_k``. Inter-cluster rotations are ``R_kl = R_k R_l^T``,
estimated from the candidates ``R_hat_p^T R_pq R_hat_q`` on the edges between
the clusters, then synchronized over the cluster graph.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import LongSyncConfig, longsync_run
from .evaluation import ErrorSummary, evaluate
from .models import SyncProblem, jaccard_matrix
from .solvers import (
    IrlsConfig,
    RotationAssignment,
    components,
    irls_gm,
    mst_init,
    spectral_cluster,
    weighted_quat_mean,
    weiszfeld_l1_mean,
)

log = logging.getLogger(__name__)

STATUS_SOLVED = "solved"
STATUS_PRUNED = "pruned"
STATUS_UNSOLVED = "unsolved"


class PipelineError(RuntimeError):
    """Failure inside one pipeline stage; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class ClusterPlan:
    K: int
    labels: np.ndarray
    clusters: list[np.ndarray]
    inter_edges: dict[tuple[int, int], np.ndarray]


@dataclass
class ClusterSolution:
    """Solution of one cluster in its own frame, indexed by original node ids."""

    nodes: np.ndarray
    kept: np.ndarray
    rotations: np.ndarray
    pruned: np.ndarray
    sub: SyncProblem | None = None

    @property
    def ok(self) -> bool:
        return len(self.kept) > 0


@dataclass
class PairEstimate:
    rotation: np.ndarray | None
    support: int
    weighted: bool

    @property
    def available(self) -> bool:
        return self.rotation is not None


@dataclass
class StitchResult:
    pair_rotations: dict[tuple[int, int], PairEstimate]
    cluster_rotations: dict[int, np.ndarray]
    rotations: np.ndarray
    stitched: np.ndarray


@dataclass
class PipelineOptions:
    K: int | None = None
    use_jaccard: bool = True
    prune_degree: int = 4
    prune_corruption: float = 0.1
    seed: int = 0
    threads: int = 1
    longsync: LongSyncConfig = field(default_factory=LongSyncConfig)
    irls: IrlsConfig = field(default_factory=IrlsConfig)


@dataclass
class PipelineReport:
    rotations: np.ndarray
    status: list[str]
    K: int
    labels: np.ndarray
    timings: dict[str, float]
    stage_errors: dict[str, ErrorSummary]
    pairs: dict[tuple[int, int], PairEstimate]

    def counts(self) -> dict[str, int]:
        return {s: self.status.count(s) for s in (STATUS_SOLVED, STATUS_PRUNED, STATUS_UNSOLVED)}

    def solved_mask(self) -> np.ndarray:
        return np.array([s == STATUS_SOLVED for s in self.status])

    def to_text(self, with_timings: bool = False) -> str:
        lines = [f"K {self.K}"]
        lines += [f"count_{k} {v}" for k, v in self.counts().items()]
        lines.append("cluster_sizes " + " ".join(str(int(x)) for x in np.bincount(self.labels, minlength=self.K)))
        avail = sum(p.available for p in self.pairs.values())
        lines.append(f"cluster_pairs {len(self.pairs)} available {avail}")
        for stage, summ in self.stage_errors.items():
            lines.append(f"error_{stage} mean_deg {summ.mean_deg:.12g} median_deg {summ.median_deg:.12g} "
                         f"n_evaluated {summ.n_evaluated}")
        if with_timings:
            lines += [f"time_{k} {v:.6f}" for k, v in self.timings.items()]
        return "\n".join(lines) + "\n"


def cluster_count(n: int, m: int) -> int:
    """max(2, round(0.6 sqrt(n p_hat))) with p_hat = 2|E| / (n(n-1))."""
    p_hat = 2.0 * m / (n * (n - 1)) if n > 1 else 0.0
    return max(2, int(round(0.6 * math.sqrt(n * p_hat))))


def partition(problem: SyncProblem, use_jaccard: bool = True, seed: int = 0,
              K: int | None = None) -> ClusterPlan:
    """Spectral clustering of the Jaccard (or adjacency) similarity."""
    K = cluster_count(problem.n, problem.m) if K is None else int(K)
    K = min(K, problem.n)
    sim = jaccard_matrix(problem) if use_jaccard else problem.adjacency()
    labels = spectral_cluster(sim, K, seed=seed)
    K = int(labels.max()) + 1
    clusters = [np.flatnonzero(labels == k) for k in range(K)]
    li, lj = labels[problem.edges[:, 0]], labels[problem.edges[:, 1]]
    inter: dict[tuple[int, int], np.ndarray] = {}
    cross = np.flatnonzero(li != lj)
    for e in cross:
        key = (int(min(li[e], lj[e])), int(max(li[e], lj[e])))
        inter.setdefault(key, []).append(e)
    inter = {k: np.array(v, dtype=np.int64) for k, v in sorted(inter.items())}
    return ClusterPlan(K=K, labels=labels, clusters=clusters, inter_edges=inter)


def _solve_weighted(problem: SyncProblem, weights: np.ndarray, irls: IrlsConfig) -> RotationAssignment:
    init = mst_init(problem, weights)
    return irls_gm(problem, init, weights, irls)


def refine_cluster(sub: SyncProblem, prune_degree: int = 4, prune_corruption: float = 0.1,
                   cfg: LongSyncConfig | None = None, irls: IrlsConfig | None = None):
    """Prune weakly supported nodes and solve the rest of one cluster.

    A node survives when at least ``prune_degree`` of its edges have estimated
    corruption below ``prune_corruption`` (LongSync with 3-cycles); the largest
    connected component of the survivors is then solved by a weighted spanning
    tree and IRLS with the LongSync weights as priors.

    Returns ``(kept, rotations, weights)`` with ``kept`` the surviving local node
    ids and ``rotations`` of shape ``(len(kept), 3, 3)``.
    """
    if sub.n == 0:
        raise ValueError("empty cluster")
    cfg = cfg or LongSyncConfig(c=3)
    empty = (np.zeros(0, dtype=np.int64), np.zeros((0, 3, 3)), np.zeros(0))
    if sub.m == 0:
        return empty
    state = longsync_run(sub, cfg)
    s = state.edge_corruption(sub)
    w = state.edge_weights(sub)
    good = s < prune_corruption
    support = np.bincount(sub.edges[good].ravel(), minlength=sub.n)
    alive = support >= prune_degree
    keep_edges = alive[sub.edges[:, 0]] & alive[sub.edges[:, 1]]
    if not alive.any() or not keep_edges.any():
        return empty
    lab = components(sub.n, sub.edges[keep_edges])
    sizes = np.bincount(lab[alive], minlength=lab.max() + 1)
    kept = np.flatnonzero(alive & (lab == int(np.argmax(sizes))))
    if len(kept) == 1:
        return kept, np.eye(3)[None], w
    inner, ids = sub.subproblem(kept)
    inner_w = w[np.isin(sub.edges[:, 0], ids) & np.isin(sub.edges[:, 1], ids)]
    sol = _solve_weighted(inner, inner_w, irls or IrlsConfig())
    return kept, sol.rotations, w


def _pair_candidates(problem: SyncProblem, edges_kl: np.ndarray, k_nodes_mask: np.ndarray,
                     rot: np.ndarray):
    a, b = problem.edges[edges_kl, 0], problem.edges[edges_kl, 1]
    obs = problem.obs[edges_kl]
    a_in_k = k_nodes_mask[a]
    p = np.where(a_in_k, a, b)
    q = np.where(a_in_k, b, a)
    r_pq = np.where(a_in_k[:, None, None], obs, np.swapaxes(obs, -1, -2))
    return np.swapaxes(rot[p], -1, -2) @ r_pq @ rot[q]


def inter_cluster_rotation(problem: SyncProblem, plan: ClusterPlan, pair: tuple[int, int],
                           rotations: np.ndarray, solved: np.ndarray,
                           cfg: LongSyncConfig | None = None, weighted: bool = True) -> PairEstimate:
    """Estimate ``R_kl`` from the edges between clusters ``k`` and ``l``.

    ``rotations`` holds the cluster-frame solution of every node and ``solved``
    marks which of them to use. With ``weighted`` the candidates are averaged
    with LongSync 4-cycle weights of the bipartite pair graph (uniform when it
    has no 4-cycle), then refined by the geodesic L1 mean.
    """
    k, l = pair
    edges_kl = plan.inter_edges.get((min(k, l), max(k, l)), np.zeros(0, dtype=np.int64))
    edges_kl = edges_kl[solved[problem.edges[edges_kl, 0]] & solved[problem.edges[edges_kl, 1]]]
    if len(edges_kl) == 0:
        return PairEstimate(None, 0, False)
    in_k = plan.labels == k
    cands = _pair_candidates(problem, edges_kl, in_k, rotations)
    weights = np.ones(len(edges_kl))
    used_weights = False
    if weighted and len(edges_kl) >= 4:
        keep = np.zeros(problem.m, dtype=bool)
        keep[edges_kl] = True
        nodes = np.unique(problem.edges[edges_kl])
        bip, _ = problem.edge_subset(keep).subproblem(nodes)
        state = longsync_run(bip, cfg or LongSyncConfig(c=4))
        wts = state.edge_weights(bip)
        starved = bip.edge_values(state.starved)
        if not starved.all() and wts.sum() > 0:
            # bip keeps the edge order of edges_kl (both lexicographic)
            weights = np.where(starved, 0.0, wts)
            used_weights = True
    mean = weighted_quat_mean(cands, weights)
    if weighted:
        mean = weiszfeld_l1_mean(cands, mean)
    return PairEstimate(mean, int(len(edges_kl)), used_weights)


def stitch_and_merge(plan: ClusterPlan, pairs: dict[tuple[int, int], PairEstimate],
                     rotations: np.ndarray, solved: np.ndarray,
                     irls: IrlsConfig | None = None) -> StitchResult:
    """Synchronize the cluster graph and move every node into one frame.

    ``cluster_rotations[k]`` is stored so that the merged node rotation is
    ``R_hat_p @ cluster_rotations[k].T``.
    """
    K = plan.K
    avail = [(k, l) for (k, l), est in sorted(pairs.items()) if est.available]
    out = np.tile(np.eye(3), (len(rotations), 1, 1))
    stitched = np.zeros(K, dtype=bool)
    cluster_rot: dict[int, np.ndarray] = {}
    if K == 1:
        stitched[0] = True
        cluster_rot[0] = np.eye(3)
    elif avail:
        edges = np.array(avail, dtype=np.int64)
        obs = np.stack([pairs[e].rotation for e in avail])
        cg = SyncProblem(n=K, edges=edges, obs=obs)
        weights = np.ones(cg.m)
        if K >= 3:
            state = longsync_run(cg, LongSyncConfig(c=3))
            if not cg.edge_values(state.starved).all():
                weights = state.edge_weights(cg)
                weights = np.where(weights > 0, weights, 1e-12)
        sol = irls_gm(cg, mst_init(cg, weights), weights, irls or IrlsConfig())
        stitched = sol.solved.copy()
        for k in np.flatnonzero(stitched):
            cluster_rot[int(k)] = sol.rotations[k].T
    else:
        stitched[0] = True
        cluster_rot[0] = np.eye(3)
    for k, rk in cluster_rot.items():
        members = np.flatnonzero((plan.labels == k) & solved)
        out[members] = rotations[members] @ rk.T
    return StitchResult(pairs, cluster_rot, out, stitched)


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def run_pipeline(problem: SyncProblem, options: PipelineOptions | None = None) -> PipelineReport:
    """All five stages; timings per stage and errors when ground truth is present."""
    opt = options or PipelineOptions()
    timings: dict[str, float] = {}
    errors: dict[str, ErrorSummary] = {}
    gt = problem.ground_truth

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except PipelineError:
            raise
        except Exception as exc:  # label and re-raise
            raise PipelineError(name, str(exc)) from exc
        timings[name] = time.perf_counter() - t0
        return result

    plan = stage("partition", lambda: partition(problem, opt.use_jaccard, opt.seed, opt.K))

    def solve_cluster(nodes):
        sub, ids = problem.subproblem(nodes)
        kept, rots, _ = refine_cluster(sub, opt.prune_degree, opt.prune_corruption,
                                       LongSyncConfig(c=3, T=opt.longsync.T, betas=opt.longsync.betas,
                                                      beta_cap=opt.longsync.beta_cap,
                                                      policy=opt.longsync.policy),
                                       opt.irls)
        return ids, ids[kept], rots

    results = stage("intra", lambda: _map(solve_cluster, plan.clusters, opt.threads))
    local = np.tile(np.eye(3), (problem.n, 1, 1))
    solved = np.zeros(problem.n, dtype=bool)
    for _, kept, rots in results:
        local[kept] = rots
        solved[kept] = True
    if gt is not None:
        per = []
        for _, kept, _ in results:
            if len(kept):
                per.append(evaluate(local[kept], gt[kept]).per_node_deg)
        if per:
            allp = np.concatenate(per)
            errors["intra"] = ErrorSummary(float(allp.mean()), float(np.median(allp)), allp, len(allp))

    keys = [(k, l) for k in range(plan.K) for l in range(k + 1, plan.K)]
    ests = stage("inter", lambda: _map(
        lambda kl: inter_cluster_rotation(problem, plan, kl, local, solved), keys, opt.threads))
    pairs = dict(zip(keys, ests))

    stitch = stage("stitch", lambda: stitch_and_merge(plan, pairs, local, solved, opt.irls))

    def merge():
        status = []
        for v in range(problem.n):
            if not solved[v]:
                status.append(STATUS_PRUNED)
            elif not stitch.stitched[plan.labels[v]]:
                status.append(STATUS_UNSOLVED)
            else:
                status.append(STATUS_SOLVED)
        return status

    status = stage("merge", merge)
    report = PipelineReport(stitch.rotations, status, plan.K, plan.labels, timings, errors, pairs)
    if gt is not None:
        mask = report.solved_mask()
        if mask.any():
            errors["final"] = evaluate(report.rotations, gt, mask)
    return report
