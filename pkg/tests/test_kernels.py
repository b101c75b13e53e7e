import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from longsync import blockmat as bm
from longsync import kernels
from longsync.cycles import random_instance

BACKENDS = ["python"] + (["compiled"] if kernels.has_compiled() else [])


def simple_paths(support, c):
    """Pure-Python permutations oracle, lexicographic order."""
    n = support.shape[0]
    out = []
    for tup in itertools.permutations(range(n), c):
        if all(support[a, b] for a, b in zip(tup[:-1], tup[1:])):
            out.append(tup)
    return np.array(sorted(out), dtype=np.int64).reshape(-1, c)


@pytest.mark.parametrize("backend", BACKENDS)
@given(seed=st.integers(0, 2**31), n=st.integers(3, 7), c=st.integers(3, 6))
def test_enumerate_paths_matches_permutations(backend, seed, n, c):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < 0.6, 1)
    support = upper | upper.T
    got = kernels.enumerate_paths(support, c, backend=backend)
    assert np.array_equal(got, simple_paths(support, c))


@pytest.mark.parametrize("backend", BACKENDS)
def test_path_sums_match_permutation_oracle(backend, rng):
    n, c = 6, 4
    w, r = random_instance(rng, n, 0.8)
    stack = bm.to_stack(r, 3)
    f, g = kernels.path_sums(w, stack, c, backend=backend)
    f_ref = np.zeros((n, n))
    g_ref = np.zeros((n, n, 3, 3))
    for path in simple_paths(w > 0, c):
        weight = np.prod([w[a, b] for a, b in zip(path[:-1], path[1:])])
        prod = np.eye(3)
        for a, b in zip(path[:-1], path[1:]):
            prod = prod @ stack[a, b]
        f_ref[path[0], path[-1]] += weight
        g_ref[path[0], path[-1]] += weight * prod
    assert np.allclose(f, f_ref, atol=1e-13)
    assert np.allclose(g, g_ref, atol=1e-13)


@pytest.mark.skipif(not kernels.has_compiled(), reason="compiled extension not built")
@given(seed=st.integers(0, 2**31), n=st.integers(4, 9), c=st.integers(3, 6))
def test_backends_agree(seed, n, c):
    rng = np.random.default_rng(seed)
    w, r = random_instance(rng, n, 0.7)
    stack = bm.to_stack(r, 3)
    fc, gc = kernels.path_sums(w, stack, c, backend="compiled")
    fp, gp = kernels.path_sums(w, stack, c, backend="python")
    assert np.allclose(fc, fp, rtol=1e-13, atol=1e-13)
    assert np.allclose(gc, gp, rtol=1e-13, atol=1e-13)
    fc_only, g_none = kernels.path_sums(w, None, c, backend="compiled")
    assert g_none is None and np.allclose(fc_only, fc)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.enumerate_paths(np.ones((3, 3)), 3, backend="gpu")


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, LONGSYNC_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import longsync.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_default_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")
    assert (kernels.BACKEND == "compiled") == kernels.has_compiled()
