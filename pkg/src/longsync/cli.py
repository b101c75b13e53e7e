"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Output files depend only on inputs and seeds; wall-clock times go to the log
unless ``--record-time`` is given.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as lio
from .config import blas_threads, derive_seed, thread_count
from .cycles import SUPPORTED_LENGTHS, verify_forms
from .engine import POLICIES, LongSyncConfig, longsync_run
from .experiments import parse_method, run_trial, solve
from .models import SyncProblem, gen_adversarial, gen_ubcm, gen_ucm
from .pipeline import PipelineOptions, run_pipeline

log = logging.getLogger("longsync")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _lengths(text: str) -> dict[int, float]:
    out = {}
    try:
        for part in text.split(","):
            c, w = part.split(":")
            out[int(c)] = float(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'c:weight,...', got {text!r}") from None
    return out


def _edge_list(text: str) -> list[tuple[int, int]]:
    out = []
    try:
        for part in text.split(","):
            if part.strip():
                a, b = part.split("-")
                out.append((int(a), int(b)))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'i-j,i-j,...', got {text!r}") from None
    return out


def _load(path, truth=None) -> SyncProblem:
    """Graph file plus ground truth (explicit path or the ``.gt`` sidecar)."""
    problem = lio.read_graph(path)
    side = lio.sidecar_paths(path)
    gt_path = Path(truth) if truth else side["truth"]
    if gt_path.exists():
        rot, present = lio.read_rotations(gt_path, problem.n, problem.d)
        if not present.all():
            raise lio.FormatError(gt_path, 0, "ground truth misses nodes")
        problem.ground_truth = rot
    if side["corruption"].exists():
        edges, vals = lio.read_edge_values(side["corruption"], 1)
        if len(edges) == problem.m and np.array_equal(edges, problem.edges):
            problem.true_corruption = vals[:, 0]
            problem.corrupted = vals[:, 0] > 1e-9
    return problem


def _p_hat(problem: SyncProblem) -> float:
    return 2.0 * problem.m / (problem.n * (problem.n - 1)) if problem.n > 1 else 0.0


def _q_hat(problem: SyncProblem) -> float:
    return float(np.mean(problem.corrupted)) if problem.corrupted is not None and problem.m else -1.0


def _ls_config(args) -> LongSyncConfig:
    return LongSyncConfig(c=args.c, T=args.T, beta_cap=args.beta_cap,
                          lengths=getattr(args, "multilength", None), policy=args.policy)


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    if args.model == "adversarial":
        problem = gen_adversarial(args.n, args.bad_edges or [], args.seed)
    else:
        q_g = 1.0 - args.q if args.qg is None else args.qg
        gen = gen_ucm if args.model == "ucm" else gen_ubcm
        problem = gen(args.n, args.p, q_g, args.seed)
    side = lio.sidecar_paths(args.out)
    lio.write_graph(side["graph"], problem)
    lio.write_rotations(side["truth"], problem.ground_truth)
    lio.write_corruption(side["corruption"], problem)
    log.info("wrote %s (+ .gt, .corr): n=%d m=%d", args.out, problem.n, problem.m)
    return EXIT_OK


def cmd_weights(args) -> int:
    problem = _load(args.input)
    cfg = _ls_config(args)
    t0 = time.perf_counter()
    state = longsync_run(problem, cfg)
    log.info("longsync finished in %.3fs", time.perf_counter() - t0)
    lio.write_weights(args.out, problem, state.edge_corruption(problem), state.edge_weights(problem))
    return EXIT_OK


def cmd_solve(args) -> int:
    problem = _load(args.input, args.truth)
    method = parse_method(args.method, args.c)
    out = solve(problem, method, args.seed, LongSyncConfig(c=max(method.c, 3), T=args.T,
                                                           beta_cap=args.beta_cap, policy=args.policy))
    log.info("%s solved %d/%d nodes in %.3fs", method.label, out.assignment.n_solved, problem.n, out.runtime_s)
    if args.out:
        lio.write_rotations(args.out, out.assignment.rotations, out.assignment.solved)
    if out.errors is not None:
        log.info("mean error %.6g deg, median %.6g deg", out.errors.mean_deg, out.errors.median_deg)
    if args.csv:
        row = lio.ResultRow(
            dataset=args.dataset or Path(args.input).name, method=method.label, c=method.c, n=problem.n,
            p=_p_hat(problem), q=_q_hat(problem), seed=args.seed,
            mean_err_deg=out.errors.mean_deg if out.errors else -1.0,
            median_err_deg=out.errors.median_deg if out.errors else -1.0,
            runtime_s=out.runtime_s if args.record_time else 0.0, n_solved=out.assignment.n_solved)
        lio.append_rows(args.csv, [row])
    return EXIT_OK


def _svg_chart(series: dict[str, list[tuple[float, float]]], xlabel: str, ylabel: str) -> str:
    """Minimal self-contained SVG line chart with axis ticks and a legend."""
    width, height, pad = 640, 420, 60
    xs = [x for pts in series.values() for x, _ in pts] or [0.0, 1.0]
    ys = [y for pts in series.values() for _, y in pts] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = 0.0, max(max(ys), 1e-9)
    if x1 == x0:
        x1 = x0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colours = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append(f'<line x1="{px(xv):.2f}" y1="{height - pad}" x2="{px(xv):.2f}" y2="{height - pad + 5}" stroke="black"/>')
        out.append(f'<text x="{px(xv):.2f}" y="{height - pad + 18}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<line x1="{pad - 5}" y1="{py(yv):.2f}" x2="{pad}" y2="{py(yv):.2f}" stroke="black"/>')
        out.append(f'<text x="{pad - 8}" y="{py(yv) + 4:.2f}" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{height / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {height / 2})">{ylabel}</text>')
    for k, (name, pts) in enumerate(sorted(series.items())):
        col = colours[k % len(colours)]
        poly = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="2" points="{poly}"/>')
        ly = pad + 16 * k
        out.append(f'<line x1="{width - pad - 150}" y1="{ly}" x2="{width - pad - 130}" y2="{ly}" '
                   f'stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad - 125}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_rows(model, n, p, q_grid, trials, methods, seed, threads, record_time=False):
    jobs = [(qi, q, t) for qi, q in enumerate(q_grid) for t in range(trials)]

    def job(item):
        qi, q, t = item
        return run_trial(model, n, p, q, derive_seed(seed, qi, t), methods, record_time)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            chunks = list(ex.map(job, jobs))
    else:
        chunks = [job(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=lambda r: r.sort_key())


def aggregate(rows) -> dict[str, list[tuple[float, float]]]:
    """Trial-averaged mean error per method and q."""
    acc: dict[tuple[str, float], list[float]] = {}
    for r in rows:
        acc.setdefault((r.method, r.q), []).append(r.mean_err_deg)
    series: dict[str, list[tuple[float, float]]] = {}
    for (m, q), vals in sorted(acc.items()):
        series.setdefault(m, []).append((q, float(np.mean(vals))))
    return series


def cmd_sweep(args) -> int:
    methods = [parse_method(m) for m in args.methods.split(",") if m.strip()]
    rows = sweep_rows(args.model, args.n, args.p, args.q_grid, args.trials, methods, args.seed,
                      args.threads, args.record_time)
    Path(args.out_csv).write_text(lio.format_rows(rows), encoding="utf-8")
    series = aggregate(rows)
    if args.out_plotdata:
        lines = []
        for m, pts in series.items():
            lines.append(f"# {m}")
            lines += [f"{x:.12g} {y:.12g}" for x, y in pts]
            lines.append("")
        Path(args.out_plotdata).write_text("\n".join(lines), encoding="utf-8")
    if args.out_svg:
        Path(args.out_svg).write_text(_svg_chart(series, "corruption probability q", "mean error (deg)"),
                                      encoding="utf-8")
    for m, pts in series.items():
        log.info("%s: %s", m, ", ".join(f"q={x:g}: {y:.4g} deg" for x, y in pts))
    return EXIT_OK


def cmd_distributed(args) -> int:
    problem = _load(args.input, args.truth)
    opts = PipelineOptions(K=args.k, use_jaccard=not args.no_jaccard, prune_degree=args.prune_degree,
                           prune_corruption=args.prune_corruption, seed=args.seed, threads=args.threads)
    t0 = time.perf_counter()
    report = run_pipeline(problem, opts)
    elapsed = time.perf_counter() - t0
    for stage, secs in report.timings.items():
        log.info("stage %s: %.3fs", stage, secs)
    if args.out:
        Path(args.out).write_text(report.to_text(with_timings=args.record_time), encoding="utf-8")
    if args.rotations:
        lio.write_rotations(args.rotations, report.rotations, report.solved_mask())
    if args.csv:
        final = report.stage_errors.get("final")
        row = lio.ResultRow(
            dataset=args.dataset or Path(args.input).name, method="distributed", c=3, n=problem.n,
            p=_p_hat(problem), q=_q_hat(problem), seed=args.seed,
            mean_err_deg=final.mean_deg if final else -1.0, median_err_deg=final.median_deg if final else -1.0,
            runtime_s=elapsed if args.record_time else 0.0, n_solved=report.counts()["solved"])
        lio.append_rows(args.csv, [row])
    return EXIT_OK


def cmd_verify_forms(args) -> int:
    n_range = (args.n, args.n) if args.n else (6, 10)
    report = verify_forms(seed=args.seed, trials=args.trials, n_range=n_range, c_set=args.c_set, tol=args.tol)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_VERIFY


def bench_times(n_grid, c, dense, repeats, seed=0, T=2):
    """Seconds per LongSync iteration for each n (best of ``repeats``)."""
    out = []
    for n in n_grid:
        problem = gen_ucm(n, 1.0 if dense else 0.5, 0.5, derive_seed(seed, n))
        cfg = LongSyncConfig(c=c, T=T)
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            longsync_run(problem, cfg)
            best = min(best, (time.perf_counter() - t0) / (T + 1))
        out.append(best)
    return out


def fitted_slope(ns, times) -> float:
    return float(np.polyfit(np.log(ns), np.log(times), 1)[0])


def cmd_bench(args) -> int:
    times = bench_times(args.n_grid, args.c, args.dense, args.repeats, args.seed)
    slope = fitted_slope(args.n_grid, times)
    lines = [f"n={n} per_iteration_s={t:.6f}" for n, t in zip(args.n_grid, times)]
    lines.append(f"fitted_slope {slope:.4f}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="longsync", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: LONGSYNC_THREADS or 1); 1 gives byte-stable output")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def weights_flags(p):
        p.add_argument("--c", type=int, default=3, help="cycle length (3..6)")
        p.add_argument("--T", type=int, default=10, help="number of reweighting steps")
        p.add_argument("--beta-cap", type=float, default=20.0)
        p.add_argument("--policy", choices=POLICIES, default="one",
                       help="corruption assigned to edges on no cycle")

    g = sub.add_parser("gen", help="generate a synthetic problem")
    g.add_argument("model", choices=["ucm", "ubcm", "adversarial"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, default=1.0)
    g.add_argument("--q", type=float, default=0.0, help="corruption probability")
    g.add_argument("--qg", type=float, default=None, help="clean probability (overrides --q)")
    g.add_argument("--bad-edges", type=_edge_list, default=None, help="adversarial: 'i-j,i-j,...'")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    w = sub.add_parser("weights", help="LongSync corruption levels and edge weights")
    w.add_argument("--in", dest="input", required=True)
    weights_flags(w)
    w.add_argument("--multilength", type=_lengths, default=None, help="e.g. '3:0.5,4:0.5'")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_weights)

    s = sub.add_parser("solve", help="absolute rotations with irls, cemp+irls or longsync+irls")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--truth", default=None)
    s.add_argument("--method", default="longsync+irls")
    weights_flags(s)
    s.set_defaults(c=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None, help="rotations file")
    s.add_argument("--csv", default=None, help="append a result row")
    s.add_argument("--dataset", default=None)
    s.add_argument("--record-time", action="store_true")
    s.set_defaults(func=cmd_solve)

    sw = sub.add_parser("sweep", help="error versus corruption probability")
    sw.add_argument("--model", choices=["ucm", "ubcm"], default="ucm")
    sw.add_argument("--n", type=int, default=200)
    sw.add_argument("--p", type=float, default=1.0)
    sw.add_argument("--q-grid", type=_float_list, default=[0.86, 0.88, 0.90])
    sw.add_argument("--trials", type=int, default=20)
    sw.add_argument("--methods", default="irls,cemp+irls,longsync4+irls,longsync5+irls")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--out-csv", required=True)
    sw.add_argument("--out-plotdata", default=None)
    sw.add_argument("--out-svg", default=None)
    sw.add_argument("--record-time", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    d = sub.add_parser("distributed", help="partitioned synchronization pipeline")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--truth", default=None)
    d.add_argument("--k", type=int, default=None, help="number of clusters")
    d.add_argument("--no-jaccard", action="store_true", help="cluster the adjacency matrix instead")
    d.add_argument("--prune-degree", type=int, default=4)
    d.add_argument("--prune-corruption", type=float, default=0.1)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default=None, help="report file")
    d.add_argument("--rotations", default=None, help="rotations file")
    d.add_argument("--csv", default=None)
    d.add_argument("--dataset", default=None)
    d.add_argument("--record-time", action="store_true")
    d.set_defaults(func=cmd_distributed)

    v = sub.add_parser("verify-forms", help="closed forms against enumeration")
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--n", type=int, default=None, help="fixed node count (default: 6..10)")
    v.add_argument("--c-set", type=_int_list, default=list(SUPPORTED_LENGTHS))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-9)
    v.set_defaults(func=cmd_verify_forms)

    b = sub.add_parser("bench", help="time LongSync iterations across n")
    b.add_argument("--n-grid", type=_int_list, default=[100, 200, 400])
    b.add_argument("--c", type=int, default=4)
    b.add_argument("--dense", action="store_true", help="complete graphs (default p=0.5)")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    args.threads = args.threads if args.threads is not None else thread_count(1)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        with blas_threads(args.threads):
            return args.func(args)
    except (lio.FormatError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"longsync: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"longsync: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
