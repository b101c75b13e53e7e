"""Text file formats: graphs, ground truth, corruption sidecars, edge weights
and result rows.

Graph file::

    n d
    i j m00 m01 ... (d*d row-major entries)

Node ids are 0-based with ``i < j``; floats use 17 significant digits so a
write/read round trip is exact.
"""
from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .models import SyncProblem
from .so3 import is_rotation


class FormatError(ValueError):
    """Malformed input file; the message carries the file and line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def fmt17(x: float) -> str:
    return f"{float(x):.17g}"


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield no, line.split()


def _floats(path, no, toks):
    try:
        vals = [float(t) for t in toks]
    except ValueError as exc:
        raise FormatError(path, no, f"bad number ({exc})") from None
    if not all(math.isfinite(v) for v in vals):
        raise FormatError(path, no, "non-finite value")
    return vals


def _int(path, no, tok, what):
    try:
        return int(tok)
    except ValueError:
        raise FormatError(path, no, f"bad {what} {tok!r}") from None


def format_graph(problem: SyncProblem) -> str:
    buf = [f"{problem.n} {problem.d}"]
    for (i, j), m in zip(problem.edges, problem.obs):
        buf.append(f"{i} {j} " + " ".join(fmt17(v) for v in m.ravel()))
    return "\n".join(buf) + "\n"


def write_graph(path, problem: SyncProblem) -> None:
    _write(path, format_graph(problem))


def read_graph(path, linear: bool = False) -> SyncProblem:
    """Parse a graph file; blocks must be rotations unless ``linear``."""
    it = _lines(path)
    try:
        no, head = next(it)
    except StopIteration:
        raise FormatError(path, 1, "empty file") from None
    if len(head) != 2:
        raise FormatError(path, no, "header must be 'n d'")
    n, d = _int(path, no, head[0], "n"), _int(path, no, head[1], "d")
    if n < 1 or d < 1:
        raise FormatError(path, no, "n and d must be positive")
    edges, obs, seen = [], [], set()
    for no, toks in it:
        if len(toks) != 2 + d * d:
            raise FormatError(path, no, f"expected {2 + d * d} fields, got {len(toks)}")
        i, j = _int(path, no, toks[0], "node id"), _int(path, no, toks[1], "node id")
        if not (0 <= i < j < n):
            raise FormatError(path, no, f"edge ({i}, {j}) needs 0 <= i < j < n={n}")
        if (i, j) in seen:
            raise FormatError(path, no, f"duplicate edge ({i}, {j})")
        seen.add((i, j))
        m = np.array(_floats(path, no, toks[2:])).reshape(d, d)
        if linear:
            if abs(np.linalg.det(m)) < 1e-12:
                raise FormatError(path, no, "singular block")
        elif not is_rotation(m):
            raise FormatError(path, no, "block is not a rotation")
        edges.append((i, j))
        obs.append(m)
    order = sorted(range(len(edges)), key=lambda k: edges[k])
    edges = np.array([edges[k] for k in order], dtype=np.int64).reshape(-1, 2)
    obs = np.array([obs[k] for k in order]).reshape(-1, d, d)
    return SyncProblem(n=n, edges=edges, obs=obs, d=d, linear=linear)


def write_rotations(path, rotations: np.ndarray, mask: np.ndarray | None = None) -> None:
    """One line per node: ``i m00 ... m22``; nodes outside ``mask`` are skipped."""
    buf = []
    for i, m in enumerate(rotations):
        if mask is None or mask[i]:
            buf.append(f"{i} " + " ".join(fmt17(v) for v in m.ravel()))
    _write(path, "\n".join(buf) + ("\n" if buf else ""))


def read_rotations(path, n: int | None = None, d: int = 3):
    """Returns ``(rotations, present)``; missing nodes get the identity."""
    rows = {}
    for no, toks in _lines(path):
        if len(toks) != 1 + d * d:
            raise FormatError(path, no, f"expected {1 + d * d} fields, got {len(toks)}")
        i = _int(path, no, toks[0], "node id")
        if i < 0 or (n is not None and i >= n):
            raise FormatError(path, no, f"node id {i} out of range")
        if i in rows:
            raise FormatError(path, no, f"duplicate node {i}")
        rows[i] = np.array(_floats(path, no, toks[1:])).reshape(d, d)
    size = n if n is not None else (max(rows) + 1 if rows else 0)
    out = np.tile(np.eye(d), (size, 1, 1))
    present = np.zeros(size, dtype=bool)
    for i, m in rows.items():
        out[i] = m
        present[i] = True
    return out, present


def write_edge_values(path, edges: np.ndarray, *columns: np.ndarray) -> None:
    buf = []
    for k, (i, j) in enumerate(edges):
        buf.append(f"{i} {j} " + " ".join(fmt17(col[k]) for col in columns))
    _write(path, "\n".join(buf) + ("\n" if buf else ""))


def read_edge_values(path, columns: int):
    edges, vals = [], []
    for no, toks in _lines(path):
        if len(toks) != 2 + columns:
            raise FormatError(path, no, f"expected {2 + columns} fields, got {len(toks)}")
        edges.append((_int(path, no, toks[0], "node id"), _int(path, no, toks[1], "node id")))
        vals.append(_floats(path, no, toks[2:]))
    return np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(vals, dtype=float).reshape(-1, columns)


def write_corruption(path, problem: SyncProblem) -> None:
    """Sidecar ``i j s_star`` with the true chordal corruption of each edge."""
    write_edge_values(path, problem.edges, problem.true_corruption)


def write_weights(path, problem: SyncProblem, s_est: np.ndarray, w_est: np.ndarray) -> None:
    write_edge_values(path, problem.edges, s_est, w_est)


def sidecar_paths(out) -> dict[str, Path]:
    base = Path(out)
    return {"graph": base, "truth": base.with_name(base.name + ".gt"),
            "corruption": base.with_name(base.name + ".corr")}


@dataclass
class ResultRow:
    dataset: str
    method: str
    c: int
    n: int
    p: float
    q: float
    seed: int
    mean_err_deg: float
    median_err_deg: float
    runtime_s: float
    n_solved: int

    @staticmethod
    def header() -> list[str]:
        return [f.name for f in fields(ResultRow)]

    def cells(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float):
                if not math.isfinite(v):
                    raise ValueError(f"{f.name} is not finite: {v}")
                out.append(f"{v:.12g}")
            else:
                out.append(str(v))
        return out

    def sort_key(self):
        return (self.dataset, self.method, self.c, self.n, self.p, self.q, self.seed)


def format_rows(rows: list[ResultRow], header: bool = True) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(ResultRow.header())
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def append_rows(path, rows: list[ResultRow]) -> None:
    """Append to a CSV, writing the header when the file is new or empty."""
    p = Path(path)
    new = not p.exists() or p.stat().st_size == 0
    with open(p, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(format_rows(rows, header=new))


def read_rows(path) -> list[ResultRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ResultRow.header():
            raise FormatError(path, 1, "unexpected CSV header")
        out = []
        types = {f.name: f.type for f in fields(ResultRow)}
        for no, rec in enumerate(reader, start=2):
            try:
                kwargs = {}
                for k, v in rec.items():
                    t = types[k]
                    kwargs[k] = int(v) if t in (int, "int") else float(v) if t in (float, "float") else v
                out.append(ResultRow(**kwargs))
            except (TypeError, ValueError) as exc:
                raise FormatError(path, no, str(exc)) from None
        return out
