"""Synthetic-experiment protocol: edge weights -> spanning tree -> IRLS ->
alignment -> errors, for the method names used on the command line.

Method names:

* ``irls``: random spanning tree, unweighted IRLS;
* ``cemp+irls``: CEMP weights (3-cycles, plain weighted mean);
* ``longsync+irls`` or ``longsync<c>+irls``: LongSync weights with ``c``-cycles.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass

import numpy as np

from .engine import LongSyncConfig, cemp_naive, longsync_run
from .evaluation import ErrorSummary, evaluate
from .io import ResultRow
from .models import SyncProblem, gen_ubcm, gen_ucm
from .solvers import IrlsConfig, RotationAssignment, irls_gm, mst_init, random_tree_init

_LS = re.compile(r"^longsync(\d*)\+irls$")


@dataclass(frozen=True)
class Method:
    kind: str
    c: int

    @property
    def label(self) -> str:
        if self.kind == "longsync":
            return f"longsync{self.c}+irls"
        return "cemp+irls" if self.kind == "cemp" else "irls"


def parse_method(name: str, c: int | None = None) -> Method:
    name = name.strip().lower()
    if name == "irls":
        return Method("irls", 0)
    if name == "cemp+irls":
        return Method("cemp", 3)
    m = _LS.match(name)
    if m:
        length = int(m.group(1)) if m.group(1) else (c if c is not None else 4)
        LongSyncConfig(c=length)  # validates the length
        return Method("longsync", length)
    raise ValueError(f"unknown method {name!r}")


@dataclass
class SolveOutcome:
    assignment: RotationAssignment
    edge_weights: np.ndarray | None
    errors: ErrorSummary | None
    runtime_s: float


def solve(problem: SyncProblem, method: Method, seed: int = 0,
          cfg: LongSyncConfig | None = None, irls: IrlsConfig | None = None) -> SolveOutcome:
    """Run one method end to end; errors are filled in when ground truth exists."""
    t0 = time.perf_counter()
    weights = None
    if method.kind == "irls":
        init = random_tree_init(problem, seed)
    else:
        base = cfg or LongSyncConfig()
        run_cfg = LongSyncConfig(c=method.c, T=base.T, betas=base.betas,
                                 beta_cap=base.beta_cap, policy=base.policy)
        state = cemp_naive(problem, run_cfg) if method.kind == "cemp" else longsync_run(problem, run_cfg)
        weights = state.edge_weights(problem)
        init = mst_init(problem, weights)
    result = irls_gm(problem, init, weights, irls)
    elapsed = time.perf_counter() - t0
    errors = None
    if problem.ground_truth is not None:
        errors = evaluate(result.rotations, problem.ground_truth, result.solved)
    return SolveOutcome(result, weights, errors, elapsed)


def generate(model: str, n: int, p: float, q: float, seed: int) -> SyncProblem:
    """``q`` is the corruption probability (each edge clean with probability 1 - q)."""
    if model == "ucm":
        return gen_ucm(n, p, 1.0 - q, seed)
    if model == "ubcm":
        return gen_ubcm(n, p, 1.0 - q, seed)
    raise ValueError(f"unknown model {model!r}")


def run_trial(model: str, n: int, p: float, q: float, seed: int, methods: list[Method],
              record_time: bool = False) -> list[ResultRow]:
    """One generated instance shared by all ``methods``; one row per method."""
    problem = generate(model, n, p, q, seed)
    rows = []
    for m in methods:
        out = solve(problem, m, seed)
        rows.append(ResultRow(
            dataset=model, method=m.label, c=m.c, n=n, p=float(p), q=float(q), seed=int(seed),
            mean_err_deg=out.errors.mean_deg, median_err_deg=out.errors.median_deg,
            runtime_s=out.runtime_s if record_time else 0.0, n_solved=out.assignment.n_solved,
        ))
    return rows
