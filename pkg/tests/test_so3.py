import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from longsync.so3 import (
    RotationError,
    axis_angle,
    canonical_quaternion,
    check_rotation,
    chordal_distance,
    chordal_distances,
    exp_so3,
    from_quaternion,
    geodesic_angle,
    geodesic_angles,
    haar_sample,
    is_rotation,
    log_so3,
    project_to_rotation,
    to_quaternion,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rot(seed, size=None):
    return haar_sample(np.random.default_rng(seed), 3, size=size)


def test_chordal_examples():
    assert chordal_distance(np.eye(3), np.eye(3)) == 0.0
    rz_pi = axis_angle([0, 0, 1], math.pi)
    assert chordal_distance(np.eye(3), rz_pi) == pytest.approx(math.sqrt(4 / 3), abs=1e-12)
    assert chordal_distance(np.eye(3), axis_angle([0, 0, 1], math.pi / 2)) == pytest.approx(
        math.sqrt(2 / 3), abs=1e-12)


def test_chordal_dimension_mismatch():
    with pytest.raises(RotationError):
        chordal_distance(np.eye(3), np.eye(2))


def test_chordal_in_other_dimensions(rng):
    r1, r2 = haar_sample(rng, 5, size=2)
    assert chordal_distance(r1, r2) == pytest.approx(math.sqrt(1 - np.sum(r1 * r2) / 5), abs=1e-12)


@given(seeds)
def test_chordal_bi_invariant_and_symmetric(seed):
    q, r1, r2 = rot(seed, 3)
    base = chordal_distance(r1, r2)
    assert abs(chordal_distance(q @ r1, q @ r2) - base) < 1e-12
    assert abs(chordal_distance(r1 @ q, r2 @ q) - base) < 1e-12
    assert chordal_distance(r2, r1) == pytest.approx(base, abs=1e-15)


@given(seeds)
def test_chordal_matches_frobenius_form(seed):
    r1, r2 = rot(seed, 2)
    lhs = chordal_distance(r1, r2) ** 2
    assert abs(lhs - (1 - np.sum(r1 * r2) / 3)) < 1e-12
    assert abs(lhs - np.linalg.norm(r1 - r2) ** 2 / 6) < 1e-12


def test_geodesic_examples(rng):
    assert geodesic_angle(np.eye(3), np.eye(3)) == 0.0
    assert geodesic_angle(np.eye(3), axis_angle([1, 0, 0], math.pi / 2)) == pytest.approx(math.pi / 2, abs=1e-14)
    r1, r2 = haar_sample(rng, size=2)
    # axis-angle oracle through scipy's rotation vector
    assert geodesic_angle(r1, r2) == pytest.approx(np.linalg.norm(log_so3(r1.T @ r2)), abs=1e-12)


def test_geodesic_rejects_other_dimensions():
    with pytest.raises(RotationError):
        geodesic_angle(np.eye(2), np.eye(2))


def test_geodesic_is_accurate_near_identity_and_pi():
    tiny = axis_angle([0, 1, 0], 1e-10)
    assert geodesic_angle(np.eye(3), tiny) == pytest.approx(1e-10, rel=1e-6)
    near_pi = axis_angle([0, 1, 0], math.pi - 1e-9)
    assert geodesic_angle(np.eye(3), near_pi) == pytest.approx(math.pi - 1e-9, abs=1e-12)
    assert geodesic_angle(np.eye(3), axis_angle([1, 1, 0], math.pi)) == pytest.approx(math.pi, abs=1e-15)


def test_geodesic_and_chordal_order_agree(rng):
    a = haar_sample(rng, size=300)
    b = haar_sample(rng, size=300)
    assert np.array_equal(np.argsort(geodesic_angles(a, b)), np.argsort(chordal_distances(a, b)))


def test_haar_draws_are_rotations_and_reproducible():
    draws = rot(7, 50)
    assert all(is_rotation(r) for r in draws)
    assert np.array_equal(draws, rot(7, 50))
    single = rot(7)
    assert single.shape == (3, 3) and is_rotation(single)


def test_haar_trace_moments():
    # For Haar SO(3): E[tr R] = 0 and E[tr(R)^2] = 1 (the trace's second moment)
    tr = np.trace(rot(2024, 100_000), axis1=1, axis2=2)
    sigma = tr.std() / math.sqrt(len(tr))
    assert abs(tr.mean()) < 3 * sigma
    sq = tr ** 2
    assert abs(sq.mean() - 1.0) < 3 * sq.std() / math.sqrt(len(sq))


def test_haar_matches_quaternion_sampler():
    # independent oracle: normalised Gaussian 4-vectors are uniform on S^3
    rng = np.random.default_rng(5)
    q = rng.standard_normal((20_000, 4))
    other = from_quaternion(q / np.linalg.norm(q, axis=1, keepdims=True))
    ours = rot(6, 20_000)
    res = stats.ks_2samp(np.trace(ours, axis1=1, axis2=2), np.trace(other, axis1=1, axis2=2))
    assert res.pvalue > 1e-3


def test_haar_left_invariance():
    q = axis_angle([1, 2, 3], 0.7)
    draws = rot(11, 20_000)
    moved = q @ draws
    # compare the distribution of a non-class function: the (0, 0) entry
    res = stats.ks_2samp(draws[:, 0, 0], moved[:, 0, 0])
    assert res.pvalue > 1e-3


def test_project_examples(rng):
    r = haar_sample(rng)
    assert np.allclose(project_to_rotation(r), r, atol=1e-14)
    assert np.allclose(project_to_rotation(1.1 * np.eye(3)), np.eye(3), atol=1e-15)
    m = np.diag([1.0, 1.0, -1.0]) + 1e-3 * rng.standard_normal((3, 3))
    out = project_to_rotation(m)
    assert np.linalg.det(out) == pytest.approx(1.0, abs=1e-12)
    # brute-force oracle: no sampled rotation beats the projection on <m, R>
    best = np.sum(m * out)
    samples = haar_sample(rng, size=20_000)
    assert np.max(np.einsum("ij,kij->k", m, samples)) <= best + 1e-12


def test_project_rejects_rank_deficient():
    with pytest.raises(RotationError):
        project_to_rotation(np.diag([1.0, 1.0, 0.0]))


@given(seeds)
def test_project_left_equivariance(seed):
    rng = np.random.default_rng(seed)
    r = haar_sample(rng)
    m = rng.standard_normal((3, 3))
    assert np.allclose(project_to_rotation(r @ m), r @ project_to_rotation(m), atol=1e-10)


def test_quaternion_examples():
    assert np.allclose(to_quaternion(np.eye(3)), [1, 0, 0, 0])
    assert np.allclose(to_quaternion(axis_angle([0, 0, 1], math.pi)), [0, 0, 0, 1], atol=1e-15)


@given(seeds)
def test_quaternion_roundtrip_and_sign(seed):
    r = rot(seed)
    q = to_quaternion(r)
    assert abs(np.linalg.norm(q) - 1) < 1e-12
    assert q[np.flatnonzero(np.abs(q) > 0)[0]] > 0
    assert np.max(np.abs(from_quaternion(q) - r)) < 1e-12
    assert np.max(np.abs(from_quaternion(-q) - r)) < 1e-12


def test_canonical_quaternion_tie_breaks():
    assert np.allclose(canonical_quaternion([0, -1, 0, 0]), [0, 1, 0, 0])
    assert np.allclose(canonical_quaternion([0, 0, -0.6, 0.8]), [0, 0, 0.6, -0.8])


def test_check_rotation_errors():
    with pytest.raises(RotationError):
        check_rotation(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(RotationError):
        check_rotation(2 * np.eye(3))
    assert np.array_equal(check_rotation(np.eye(3)), np.eye(3))


def test_exp_log_inverse(rng):
    v = rng.standard_normal((10, 3))
    v *= (np.pi * 0.9 / np.linalg.norm(v, axis=1))[:, None] * rng.random(10)[:, None]
    assert np.allclose(log_so3(exp_so3(v)), v, atol=1e-12)
    assert np.allclose(exp_so3(np.zeros(3)), np.eye(3))
