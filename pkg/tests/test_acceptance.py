"""Acceptance suite: one test and one summary line per criterion.

Every protocol constant is pinned at the top of its test. A criterion the
method cannot meet is reported as FAIL and marked xfail at run time, with the
measured numbers in the reason; it is never loosened until it passes.
"""
import math
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from conftest import ACCEPTANCE_LINES
from longsync import cli
from longsync.config import derive_seed
from longsync.cycles import verify_forms
from longsync.engine import LongSyncConfig, cemp_naive, geometric_betas, longsync_run
from longsync.experiments import parse_method, run_trial, solve
from longsync.models import compute_lambda, gen_adversarial, gen_ucm
from longsync.pipeline import PipelineOptions, inter_cluster_rotation, partition, run_pipeline
from longsync.so3 import geodesic_angle, haar_sample


def report(k, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")


def test_criterion_1_closed_forms_match_enumeration():
    trials, tol, budget_s = 100, 1e-9, 120.0
    t0 = time.perf_counter()
    rep = verify_forms(seed=2024, trials=trials, n_range=(6, 10), c_set=(3, 4, 5, 6), tol=tol)
    elapsed = time.perf_counter() - t0
    worst = max(max(rep.worst_f.values()), max(rep.worst_g.values()))
    ok = rep.ok and elapsed < budget_s
    report(1, ok, f"max |closed - brute| = {worst:.1e} < {tol:g} over {trials} trials per c, {elapsed:.0f}s")
    assert ok


def test_criterion_2_vectorized_matches_naive_cemp():
    instances, n, q_g, T, tol, budget_s = 20, 9, 0.6, 5, 1e-8, 60.0
    t0 = time.perf_counter()
    worst = 0.0
    for c in (3, 4):
        for k in range(instances):
            prob = gen_ucm(n, 1.0, q_g, seed=derive_seed(7, c, k))
            cfg = LongSyncConfig(c=c, T=T, keep_trace=True)
            fast = longsync_run(prob, cfg).trace
            slow = cemp_naive(prob, cfg, use_quadratic_mean=True).trace
            for (s_fast, _), (s_slow, _) in zip(fast, slow):
                worst = max(worst, float(np.max(np.abs(s_fast - s_slow))))
    elapsed = time.perf_counter() - t0
    ok = worst < tol and elapsed < budget_s
    report(2, ok, f"max per-edge gap {worst:.1e} < {tol:g} at t <= {T}, c in {{3,4}}, {elapsed:.0f}s")
    assert ok


def _adversarial_instance(c, seed):
    """Complete graph with a few spread-out corrupted edges, lambda below the convergence threshold."""
    rng = np.random.default_rng(seed)
    n, n_bad = (16, 3) if c == 3 else (30, 4)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    bad = [pairs[k] for k in rng.choice(len(pairs), size=n_bad, replace=False)]
    return gen_adversarial(n, bad, seed)


_bound_stats = {"instances": 0, "worst_ratio": 0.0}


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(c=st.sampled_from([3, 4]), seed=st.integers(0, 2**31 - 1))
def _check_adversarial_bound(c, seed):
    T = 8
    prob = _adversarial_instance(c, seed)
    lam = compute_lambda(prob, c, method="closed").lam
    # the convergence bound needs 0 < lambda < 1 / (1 + (c-1)^2)
    assume(0 < lam < 1 / (1 + (c - 1) ** 2))
    beta0 = 1 / (2 * (c - 1))
    r = 0.9 / (c - 1) * math.sqrt((1 - lam) / lam)
    cfg = LongSyncConfig(c=c, T=T, betas=geometric_betas(beta0, r, T), keep_trace=True)
    trace = longsync_run(prob, cfg).trace
    truth = prob.to_matrix(prob.true_corruption)
    assert len(trace) == T + 1
    for t, (s, _) in enumerate(trace):
        bound = 1 / ((c - 1) * beta0 * r ** t)
        gap = float(np.max(np.abs(s - truth)))
        _bound_stats["worst_ratio"] = max(_bound_stats["worst_ratio"], gap / bound)
        assert gap <= bound, f"c={c} seed={seed} t={t}: {gap} > {bound}"
    _bound_stats["instances"] += 1


def test_criterion_3_adversarial_convergence_bound():
    try:
        _check_adversarial_bound()
    except AssertionError:
        report(3, False, "bound violated, see assertion")
        raise
    report(3, True, f"max_ij |s_t - s*| <= 1/((c-1) beta0 r^t) for t <= 8 on {_bound_stats['instances']} "
                    f"instances, worst gap/bound {_bound_stats['worst_ratio']:.2f}")


def _trial_means(model, n, q, trials, labels, base_seed):
    methods = [parse_method(m) for m in labels]
    acc = {m.label: [] for m in methods}
    for t in range(trials):
        for row in run_trial(model, n, 1.0, q, derive_seed(base_seed, int(round(q * 100)), t), methods):
            acc[row.method].append(row.mean_err_deg)
    return {k: float(np.mean(v)) for k, v in acc.items()}


def test_criterion_4_ucm_trend_with_cycle_length():
    n, trials, q_grid, slack = 200, 10, (0.86, 0.88, 0.90), 0.10
    order = ["longsync5+irls", "longsync4+irls", "cemp+irls", "irls"]
    means = {q: _trial_means("ucm", n, q, trials, order, base_seed=404) for q in q_grid}
    broken = []
    for q, m in means.items():
        for a, b in zip(order, order[1:]):
            if q == q_grid[0]:
                holds = m[a] <= (1 + slack) * m[b]
            elif q == q_grid[-1]:
                holds = m[a] < m[b]
            else:
                holds = True
            if not holds:
                broken.append(f"q={q}: {a} {m[a]:.2f} vs {b} {m[b]:.2f}")
    table = "; ".join(f"q={q}: " + ", ".join(f"{k}={v:.2f}" for k, v in m.items()) for q, m in means.items())
    report(4, not broken, table)
    if broken:
        pytest.xfail("ordering LS5 <= LS4 <= CEMP3 <= IRLS does not hold: " + "; ".join(broken))


def test_criterion_5_ubcm_near_exact():
    n, q, trials, target_deg, factor = 200, 0.8, 10, 1.0, 5.0
    m = _trial_means("ubcm", n, q, trials, ["longsync4+irls", "cemp+irls", "irls"], base_seed=505)
    ls = m["longsync4+irls"]
    ok = ls < target_deg and m["irls"] >= factor * ls and m["cemp+irls"] >= factor * ls
    report(5, ok, ", ".join(f"{k}={v:.3f}" for k, v in m.items()) + f" deg over {trials} trials")
    if not ok:
        pytest.xfail(f"UBCM q={q}: longsync4+irls {ls:.3f} deg, irls {m['irls']:.3f}, cemp {m['cemp+irls']:.3f}")


def _injection_trial(seed, n=400, p=0.5, bad_fraction=0.4):
    """Clean UCM graph, exact cluster-local frames, 40% of one cluster pair's edges corrupted."""
    layout = gen_ucm(n, p, 1.0, seed)
    plan = partition(layout, seed=seed)
    pair = max(plan.inter_edges, key=lambda k: len(plan.inter_edges[k]))
    idx = plan.inter_edges[pair]
    rng = np.random.default_rng(seed)
    chosen = rng.choice(idx, size=int(round(bad_fraction * len(idx))), replace=False)
    prob = gen_adversarial(n, [tuple(layout.edges[k]) for k in chosen], seed, edges=layout.edges)
    offsets = haar_sample(rng, size=plan.K)
    local = prob.ground_truth @ np.swapaxes(offsets[plan.labels], 1, 2)
    truth = offsets[pair[0]] @ offsets[pair[1]].T
    solved = np.ones(n, bool)
    weighted = inter_cluster_rotation(prob, plan, pair, local, solved)
    plain = inter_cluster_rotation(prob, plan, pair, local, solved, weighted=False)
    return geodesic_angle(weighted.rotation, truth), geodesic_angle(plain.rotation, truth)


def test_criterion_6_distributed_pipeline():
    n, p, q, seed, floor_deg, trials, wins_needed = 400, 0.5, 0.3, 6, 1e-6, 10, 8
    prob = gen_ucm(n, p, 1.0 - q, seed)
    rep = run_pipeline(prob, PipelineOptions(seed=seed))
    stages = set(rep.timings) == {"partition", "intra", "inter", "stitch", "merge"}
    dist_median = rep.stage_errors["final"].median_deg
    central = solve(prob, parse_method("longsync3+irls"), seed).errors.median_deg
    # both medians are exact to rounding here, so compare above a tiny floor
    close = dist_median <= 2 * max(central, floor_deg)
    results = [_injection_trial(derive_seed(66, t)) for t in range(trials)]
    wins = sum(w < u for w, u in results)
    ok = stages and close and wins >= wins_needed
    report(6, ok, f"K={rep.K}, median {dist_median:.2e} vs centralized {central:.2e} deg "
                  f"(floor {floor_deg:g}); weighted wins {wins}/{trials}")
    assert ok


def test_criterion_7_scaling_slope():
    n_grid, c, repeats, lo, hi = (100, 200, 400), 4, 3, 2.2, 3.6
    times = cli.bench_times(n_grid, c, dense=False, repeats=repeats, seed=0)
    slope = cli.fitted_slope(n_grid, times)
    ok = lo <= slope <= hi
    report(7, ok, f"slope {slope:.2f} in [{lo}, {hi}], per-iteration s " +
           ", ".join(f"{t:.3f}" for t in times))
    assert ok


def _cli_outputs(d):
    d.mkdir()
    g = d / "g.txt"
    steps = [
        ["gen", "ucm", "--n", "60", "--p", "0.6", "--q", "0.3", "--seed", "8", "--out", g],
        ["weights", "--in", g, "--c", "4", "--out", d / "w.txt"],
        ["weights", "--in", g, "--multilength", "3:0.5,4:0.5", "--out", d / "wm.txt"],
        ["solve", "--in", g, "--method", "longsync5+irls", "--csv", d / "s.csv", "--out", d / "r.txt"],
        ["distributed", "--in", g, "--k", "3", "--out", d / "rep.txt", "--csv", d / "d.csv",
         "--rotations", d / "dr.txt"],
        ["sweep", "--model", "ubcm", "--n", "24", "--q-grid", "0.2,0.5", "--trials", "2",
         "--methods", "irls,cemp+irls,longsync4+irls", "--out-csv", d / "sw.csv",
         "--out-plotdata", d / "sw.txt", "--out-svg", d / "sw.svg"],
    ]
    for argv in steps:
        assert cli.main(["--threads", "1"] + [str(a) for a in argv]) == 0
    return {f.name: f.read_bytes() for f in sorted(d.iterdir())}


def test_criterion_8_cli_determinism(tmp_path):
    first = _cli_outputs(tmp_path / "a")
    second = _cli_outputs(tmp_path / "b")
    diff = sorted(k for k in first if first[k] != second.get(k))
    ok = not diff and first.keys() == second.keys()
    report(8, ok, f"{len(first)} output files byte-identical across reruns" if ok else f"differs: {diff}")
    assert ok
