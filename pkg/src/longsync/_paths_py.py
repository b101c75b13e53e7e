"""Pure-numpy simple-path kernels, used when the compiled extension is absent.

Paths are grown one vertex at a time over the whole frontier at once. Memory
is proportional to the number of paths, so this is only suitable for the
small graphs the enumeration oracles are meant for.
"""
from __future__ import annotations

import numpy as np


def enumerate_paths(support: np.ndarray, c: int) -> np.ndarray:
    support = np.asarray(support, dtype=bool)
    n = support.shape[0]
    if c < 2 or c > n:
        return np.zeros((0, max(c, 0)), dtype=np.int64)
    frontier = np.arange(n, dtype=np.int64)[:, None]
    nodes = np.arange(n)
    for _ in range(c - 1):
        ok = support[frontier[:, -1]]
        ok &= ~(frontier[:, :, None] == nodes).any(axis=1)
        rows, nxt = np.nonzero(ok)
        frontier = np.concatenate([frontier[rows], nxt[:, None]], axis=1)
    # np.nonzero walks row-major, so the frontier stays lexicographically sorted
    return frontier


def path_sums(w: np.ndarray, rot: np.ndarray | None, c: int):
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    paths = enumerate_paths(w != 0, c)
    f = np.zeros((n, n))
    g = None
    if rot is not None:
        d = rot.shape[2]
        g = np.zeros((n, n, d, d))
    if len(paths) == 0:
        return f, g
    weight = np.ones(len(paths))
    for k in range(c - 1):
        weight *= w[paths[:, k], paths[:, k + 1]]
    first, last = paths[:, 0], paths[:, -1]
    np.add.at(f, (first, last), weight)
    if rot is not None:
        prod = rot[paths[:, 0], paths[:, 1]]
        for k in range(1, c - 1):
            prod = prod @ rot[paths[:, k], paths[:, k + 1]]
        np.add.at(g, (first, last), weight[:, None, None] * prod)
    return f, g
