"""Compiled versus pure-Python simple-path kernels.

Usage::

    python benchmarks/bench_kernels.py [--sizes 7,8,9,10] [--c 3,4,5,6] [--repeats 3]

Prints one line per (kernel, c, n) with both timings, the speedup and whether
the two backends agree exactly.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from longsync import kernels
from longsync.cycles import random_instance
from longsync import blockmat as bm


def _best(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="7,8,9,10")
    ap.add_argument("--c", default="3,4,5,6")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not kernels.has_compiled():
        print("compiled extension not available; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'c':>3}{'n':>4}{'compiled_s':>14}{'python_s':>12}{'speedup':>10}  agree")
    for n in (int(x) for x in args.sizes.split(",")):
        w, r = random_instance(rng, n, 0.8)
        stack = bm.to_stack(r, 3)
        for c in (int(x) for x in args.c.split(",")):
            tc, (fc, gc) = _best(lambda: kernels.path_sums(w, stack, c, "compiled"), args.repeats)
            tp, (fp, gp) = _best(lambda: kernels.path_sums(w, stack, c, "python"), args.repeats)
            same = np.allclose(fc, fp, rtol=1e-12, atol=1e-12) and np.allclose(gc, gp, rtol=1e-12, atol=1e-12)
            print(f"{'path_sums':<16}{c:>3}{n:>4}{tc:>14.5f}{tp:>12.5f}{tp / tc:>10.1f}  {same}")
            tc, pc = _best(lambda: kernels.enumerate_paths(w > 0, c, "compiled"), args.repeats)
            tp, pp = _best(lambda: kernels.enumerate_paths(w > 0, c, "python"), args.repeats)
            print(f"{'enumerate_paths':<16}{c:>3}{n:>4}{tc:>14.5f}{tp:>12.5f}{tp / tc:>10.1f}  "
                  f"{np.array_equal(pc, pp)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
