import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longsync.evaluation import align, error_summary, evaluate
from longsync.so3 import axis_angle, exp_so3, haar_sample


def l1_objective(est, truth, r):
    return float(np.sum(np.linalg.norm(est @ r - truth, axis=(1, 2))))


def test_align_recovers_global_offset():
    rng = np.random.default_rng(0)
    truth = haar_sample(rng, size=15)
    q = haar_sample(rng)
    est = truth @ q
    r = align(est, truth)
    assert np.allclose(est @ r, truth, atol=1e-12)
    assert l1_objective(est, truth, r) < 1e-10


def test_align_single_node():
    rng = np.random.default_rng(1)
    t, e = haar_sample(rng, size=2)
    r = align(e[None], t[None])
    assert np.allclose(e @ r, t, atol=1e-12)
    assert evaluate(e[None], t[None]).mean_deg < 1e-9


def test_align_errors():
    with pytest.raises(ValueError):
        align(np.zeros((0, 3, 3)), np.zeros((0, 3, 3)))
    with pytest.raises(ValueError):
        align(np.tile(np.eye(3), (2, 1, 1)), np.tile(np.eye(3), (3, 1, 1)))


def test_align_ignores_one_outlier_against_grid_oracle():
    rng = np.random.default_rng(2)
    truth = haar_sample(rng, size=21)
    q = axis_angle([0, 0, 1], 0.8)
    est = truth @ q
    est[7] = haar_sample(rng)
    r = align(est, truth)
    assert np.max(np.abs(r - q.T)) < 1e-6
    # oracle: nothing in a dense neighbourhood of the answer does better
    best = l1_objective(est, truth, q.T)
    probes = q.T @ exp_so3(0.02 * rng.standard_normal((3000, 3)))
    assert all(l1_objective(est, truth, p) >= best - 1e-12 for p in probes)


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_align_objective_non_increasing(seed):
    rng = np.random.default_rng(seed)
    truth = haar_sample(rng, size=12)
    est = truth @ exp_so3(0.5 * rng.standard_normal((12, 3))) @ haar_sample(rng)
    hist = []
    align(est, truth, history=hist)
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_error_summary_examples():
    rng = np.random.default_rng(3)
    truth = haar_sample(rng, size=10)
    perfect = error_summary(truth, truth, np.eye(3))
    assert perfect.mean_deg == 0.0 and perfect.median_deg == 0.0 and perfect.n_evaluated == 10
    flipped = truth.copy()
    flipped[4] = truth[4] @ axis_angle([1, 0, 0], math.pi)
    out = evaluate(flipped, truth)
    assert out.per_node_deg[4] == pytest.approx(180.0, abs=1e-9)
    assert np.max(np.delete(out.per_node_deg, 4)) < 1e-9
    assert out.per_node_deg.max() <= 180.0


def test_two_population_fixture():
    # six nodes exact, four rotated by 90 degrees about z; the L1 alignment sides with the six
    truth = np.tile(np.eye(3), (10, 1, 1))
    est = truth.copy()
    est[6:] = axis_angle([0, 0, 1], math.pi / 2)
    out = evaluate(est, truth)
    assert np.allclose(out.per_node_deg[:6], 0.0, atol=1e-6)
    assert np.allclose(out.per_node_deg[6:], 90.0, atol=1e-6)
    assert out.median_deg == pytest.approx(0.0, abs=1e-6)
    assert out.mean_deg == pytest.approx(36.0, abs=1e-5)
    assert out.median_deg <= out.per_node_deg.max()


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_gauge_invariance(seed):
    rng = np.random.default_rng(seed)
    truth = haar_sample(rng, size=8)
    est = truth @ exp_so3(0.3 * rng.standard_normal((8, 3)))
    q = haar_sample(rng)
    a = evaluate(est, truth)
    b = evaluate(est @ q, truth)
    assert abs(a.mean_deg - b.mean_deg) < 1e-8
    assert abs(a.median_deg - b.median_deg) < 1e-8


def test_degree_conversion():
    theta = 0.123
    out = error_summary(axis_angle([0, 1, 0], theta)[None], np.eye(3)[None], np.eye(3))
    assert out.mean_deg == pytest.approx(180 / math.pi * theta, abs=1e-10)


def test_evaluate_mask_and_empty():
    rng = np.random.default_rng(5)
    truth = haar_sample(rng, size=6)
    est = truth.copy()
    est[5] = haar_sample(rng)
    mask = np.array([1, 1, 1, 1, 1, 0], bool)
    out = evaluate(est, truth, mask)
    assert out.n_evaluated == 5 and out.mean_deg < 1e-9
    empty = error_summary(np.zeros((0, 3, 3)), np.zeros((0, 3, 3)), np.eye(3))
    assert empty.n_evaluated == 0 and math.isnan(empty.mean_deg)
