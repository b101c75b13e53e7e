"""Closed-form simple-cycle operators and their enumeration oracle.

For a weight matrix ``W`` and a block observation matrix ``R`` let
``P = (W kron 1_d) * R``. Then

* ``f_c(W)[i, j]``  sums, over simple paths ``i -> ... -> j`` with ``c``
  distinct vertices, the product of the edge weights along the path;
* ``g_c(W, R)[i, j]`` sums the same weights times the ordered block product
  ``R[i,k1] R[k1,k2] ... R[k,j]``.

Both start from the walk sum ``P^(c-1)`` and remove walks that revisit a
vertex by inclusion-exclusion over the possible repeat patterns. The only
property of ``R`` the corrections rely on is ``R[j,i] = R[i,j]^-1`` on edges,
so the same code serves rotations, general linear groups and, with ``d = 1``
and ``R = 1``, the scalar count ``f_c``. Derivations and oracle evidence are
in ``docs/FORMULA_NOTES.md``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import blockmat as bm
from . import kernels
from .config import numerics
from .so3 import haar_sample

SUPPORTED_LENGTHS = (3, 4, 5, 6)

# Number of repeat patterns removed by inclusion-exclusion, plus the walk term.
SUMMAND_COUNTS = {3: 1, 4: 4, 5: 11, 6: 41}


class UnsupportedCycleLength(ValueError):
    pass


class EnumerationLimitError(ValueError):
    pass


@dataclass
class CycleFormResult:
    f: np.ndarray
    g: np.ndarray | None
    d: int = 3
    matmuls: int = field(default=0, compare=False)


class _Algebra:
    """Block operations over one fixed ``(W, R)`` pair, counting products."""

    def __init__(self, w: np.ndarray, r: np.ndarray, d: int):
        self.w = w
        self.r = r
        self.d = d
        self.n = w.shape[0]
        self.matmuls = 0
        self.p = bm.lift_hadamard(w, r, d)

    def mm(self, *xs):
        out = xs[0]
        for x in xs[1:]:
            out = out @ x
            self.matmuls += 1
        return out

    def lift(self, wk, x=None):
        return bm.lift_hadamard(wk, self.r if x is None else x, self.d)

    def dblock(self, x):
        return bm.block_diag_extract(x, self.d)

    def scalar(self, v):
        return bm.scalar_blocks(v, self.d)

    def sandwich(self, x):
        # block (i,j): w_ij^2 R_ij X(j,i) R_ij  (walks that cross back over ij)
        d = self.d
        return self.lift(self.w ** 2, bm.block_hadamard(self.r, bm.block_swap(x, d), self.r, d=d))

    def triple(self, x, y, z):
        # block (i,j): X(i,j) Y(j,i) Z(i,j)
        return bm.block_hadamard(x, bm.block_swap(y, self.d), z, d=self.d)

    def crossed_pair(self):
        """Walks i a j i a j: sum_a w_ia^2 w_aj^2 w_ij Q_a R_ji Q_a, Q_a = R_ia R_aj.

        With K = P kron P blockwise, (K K)(i,j) = sum_a w^2 w^2 Q_a kron Q_a and
        (Q kron Q)[(x,u),(z,w)] M[z,u] = (Q M Q)[x,w].
        """
        n, d = self.n, self.d
        k = bm.kron_lift(self.p, d)
        k2 = self.mm(k, k).reshape(n, d, d, n, d, d)
        back = bm.blocks(self.p, d).transpose(2, 1, 0, 3)  # back[i,z,j,u] = P(j,i)[z,u]
        out = np.einsum("ixujzw,izju->ixjw", k2, back, optimize=True)
        return np.ascontiguousarray(out).reshape(n * d, n * d)


def _form3(al: _Algebra):
    p = al.p
    return al.mm(p, p)


def _form4(al: _Algebra):
    p, w = al.p, al.w
    p2 = al.mm(p, p)
    q2 = al.dblock(p2)
    return al.mm(p2, p) - al.mm(q2, p) - al.mm(p, q2) + al.lift(w ** 3)


def _form5(al: _Algebra):
    p, w = al.p, al.w
    p2 = al.mm(p, p)
    p3 = al.mm(p2, p)
    p4 = al.mm(p3, p)
    q2 = al.dblock(p2)
    q3 = al.dblock(p3)
    c3 = al.lift(w ** 3)
    return (
        p4
        - al.mm(q2, p2) - al.mm(q3, p) - al.mm(p, q2, p) - al.mm(p, q3) - al.mm(p2, q2)
        + al.mm(c3, p) + al.mm(p, c3)
        + 2.0 * al.lift(w ** 2, p2)
        + al.sandwich(p2)
    )


def _form6(al: _Algebra):
    p, w = al.p, al.w
    w2 = w ** 2
    p2 = al.mm(p, p)
    p3 = al.mm(p2, p)
    p4 = al.mm(p3, p)
    p5 = al.mm(p4, p)
    q2 = al.dblock(p2)
    q3 = al.dblock(p3)
    q4 = al.dblock(p4)
    # closed back-and-forth walks collapse to scalars
    a = np.sum(w2, axis=1)
    quart = al.scalar(np.sum(w2 * w2, axis=1))      # sum_a w_ia^4
    ladder = al.scalar(w2 @ a)                      # sum_a w_ia^2 sum_b w_ab^2
    c3 = al.lift(w ** 3)
    c5 = al.lift(w ** 5)
    sw = al.sandwich(p2)
    h2p2 = al.lift(w2, p2)

    single = (
        al.mm(q2, p3) + al.mm(q3, p2) + al.mm(q4, p) + al.mm(p, q2, p2) + al.mm(p, q3, p)
        + al.mm(p, q4) + al.mm(p2, q2, p) + al.mm(p2, q3) + al.mm(p3, q2)
    )
    triple_repeat = al.mm(q2, q2, p) + al.mm(p, q2, q2)
    pairs = (
        al.mm(c3, p2) + al.mm(h2p2 * 2.0 + sw, p) + 2.0 * al.lift(w2, p3) + al.mm(q2, p, q2)
        + al.triple(p, p2, p2) + al.triple(p2, p, p2) + al.triple(p2, p2, p) + al.triple(p, p3, p)
        + al.mm(ladder, p) + al.mm(p, ladder)
        + al.mm(p, c3, p) + al.mm(p, h2p2 * 2.0 + sw) + al.mm(p2, c3)
    )
    mixed = al.mm(quart, p) + al.mm(p, quart) + 2.0 * (al.mm(q2, c3) + al.mm(c3, q2))
    three_pairs = 3.0 * al.lift(w2 @ w2, p) + al.crossed_pair()
    return p5 - single + 2.0 * triple_repeat + pairs - 2.0 * mixed + 4.0 * c5 - three_pairs


_FORMS = {3: _form3, 4: _form4, 5: _form5, 6: _form6}


def _check_length(c: int) -> None:
    if c not in _FORMS:
        if isinstance(c, int) and c >= 7:
            raise UnsupportedCycleLength(
                f"c={c}: closed forms exist only for c <= 6; longer cycles are "
                "rarely useful in practice and their formulas become unwieldy"
            )
        raise UnsupportedCycleLength(f"unsupported cycle length {c!r}")


def g_closed_form(w: np.ndarray, r: np.ndarray, c: int, d: int) -> tuple[np.ndarray, int]:
    """Block operator ``g_c(W, R)`` and the number of matrix products used."""
    _check_length(c)
    al = _Algebra(np.asarray(w, dtype=float), np.asarray(r, dtype=float), d)
    out = _FORMS[c](al)
    idx = np.arange(al.n)
    bm.blocks(out, d)[idx, :, idx, :] = 0.0
    return out, al.matmuls


def f_closed_form(w: np.ndarray, c: int) -> np.ndarray:
    """Scalar operator ``f_c(W)`` (the ``d = 1`` instance of :func:`g_closed_form`)."""
    w = np.asarray(w, dtype=float)
    out, _ = g_closed_form(w, np.ones_like(w), c, 1)
    return out


def f_g_closed_form(w: np.ndarray, r: np.ndarray, c: int, d: int = 3) -> CycleFormResult:
    f = f_closed_form(w, c)
    g, count = g_closed_form(w, r, c, d)
    return CycleFormResult(f=f, g=g, d=d, matmuls=count)


def matmul_counts() -> dict[int, int]:
    """Block matrix products per evaluation of ``g_c`` (for complexity accounting)."""
    w = np.ones((4, 4)) - np.eye(4)
    return {c: g_closed_form(w, np.kron(w, np.eye(3)), c, 3)[1] for c in SUPPORTED_LENGTHS}


def f_g_bruteforce(w: np.ndarray, r: np.ndarray | None, c: int, d: int = 3,
                   limit: int | None = None, backend: str | None = None) -> CycleFormResult:
    """Exact sums by explicit enumeration of every simple ij,c-path."""
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    limit = numerics().enumeration_limit if limit is None else limit
    if n > limit:
        raise EnumerationLimitError(f"n={n} exceeds the enumeration limit {limit}")
    if c < 3:
        raise UnsupportedCycleLength(f"cycle length must be >= 3, got {c}")
    stack = None if r is None else bm.to_stack(np.asarray(r, dtype=float), d)
    f, g = kernels.path_sums(w, stack, c, backend=backend)
    return CycleFormResult(f=f, g=None if g is None else bm.from_stack(g), d=d)


def random_instance(rng: np.random.Generator, n: int, edge_p: float = 0.7, d: int = 3):
    """Random symmetric weights in [0, 1] on an Erdos-Renyi support with Haar blocks."""
    upper = np.triu(rng.random((n, n)) < edge_p, 1)
    support = upper | upper.T
    w = np.triu(rng.random((n, n)), 1)
    w = (w + w.T) * support
    stack = np.zeros((n, n, d, d))
    iu, ju = np.nonzero(upper)
    rots = haar_sample(rng, d, size=len(iu)) if len(iu) else np.zeros((0, d, d))
    stack[iu, ju] = rots
    stack[ju, iu] = np.swapaxes(rots, -1, -2)
    return w, bm.from_stack(stack)


@dataclass
class VerifyReport:
    worst_f: dict[int, float]
    worst_g: dict[int, float]
    trials: int
    tol: float

    @property
    def ok(self) -> bool:
        return all(v < self.tol for v in self.worst_f.values()) and all(
            v < self.tol for v in self.worst_g.values())

    def lines(self) -> list[str]:
        out = []
        for c in sorted(self.worst_f):
            status = "ok" if max(self.worst_f[c], self.worst_g[c]) < self.tol else "MISMATCH"
            out.append(f"c={c} trials={self.trials} max|f-f_enum|={self.worst_f[c]:.3e} "
                       f"max|g-g_enum|={self.worst_g[c]:.3e} {status}")
        return out


def verify_forms(seed: int = 0, trials: int = 20, n_range: tuple[int, int] = (6, 10),
                 c_set: Iterable[int] = SUPPORTED_LENGTHS, tol: float = 1e-9,
                 d: int = 3, edge_p: float | None = None) -> VerifyReport:
    """Compare closed forms against enumeration on random instances.

    Mismatches are reported, not raised.
    """
    rng = np.random.default_rng(seed)
    c_set = list(c_set)
    worst_f = {c: 0.0 for c in c_set}
    worst_g = {c: 0.0 for c in c_set}
    lo, hi = n_range
    for _ in range(trials):
        for c in c_set:
            n = int(rng.integers(lo, hi + 1))
            p = float(rng.uniform(0.4, 1.0)) if edge_p is None else edge_p
            w, r = random_instance(rng, n, p, d)
            closed = f_g_closed_form(w, r, c, d)
            brute = f_g_bruteforce(w, r, c, d, limit=max(n, numerics().enumeration_limit))
            worst_f[c] = max(worst_f[c], float(np.max(np.abs(closed.f - brute.f))))
            worst_g[c] = max(worst_g[c], float(np.max(np.abs(closed.g - brute.g))))
    return VerifyReport(worst_f, worst_g, trials, tol)
