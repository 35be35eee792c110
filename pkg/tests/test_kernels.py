import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from robsub.errors import DegenerateFitError
from robsub.kernels import (
    als_pca,
    canonical_basis,
    orthonormalize,
    principal_angles,
    random_orthogonal,
    solve_scores,
    spatial_median,
    standardized_last_angle,
)


def test_orthonormalize_idempotent():
    B = random_orthogonal(6, 3, np.random.default_rng(0))
    Q = orthonormalize(B)
    assert principal_angles(B, Q).max() < 1e-12
    np.testing.assert_allclose(orthonormalize(Q), Q, atol=1e-15)


def test_orthonormalize_gram_schmidt_by_hand():
    B = np.array([[1.0, 2.0], [0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(orthonormalize(B), np.eye(3)[:, :2], atol=1e-15)


def test_orthonormalize_sign_convention_and_span():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((10, 2))
    Q = orthonormalize(B)
    assert np.linalg.norm(Q.T @ Q - np.eye(2)) < 1e-12
    assert principal_angles(Q, np.linalg.qr(B)[0]).max() < 1e-8
    for col in Q.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_orthonormalize_rank_deficient():
    with pytest.raises(DegenerateFitError):
        orthonormalize(np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]))


def test_random_orthogonal_small_and_deterministic():
    v = random_orthogonal(1, 1, np.random.default_rng(3))
    assert abs(abs(v[0, 0]) - 1.0) < 1e-15
    a = random_orthogonal(5, 2, np.random.default_rng(7))
    b = random_orthogonal(5, 2, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    assert np.linalg.norm(a.T @ a - np.eye(2)) < 1e-12


def test_random_orthogonal_haar_moment():
    rng = np.random.default_rng(4)
    p, q, draws = 50, 3, 1000
    acc = np.zeros((p, p))
    for _ in range(draws):
        B = random_orthogonal(p, q, rng)
        acc += B @ B.T
    mean = acc / draws
    # entries of B B^T have sd about sqrt(q)/p; the mean over 1000 draws is ~30x tighter
    assert np.abs(np.diag(mean) - q / p).max() < 0.02
    assert np.abs(mean - np.diag(np.diag(mean))).max() < 0.01


def test_random_orthogonal_first_column_uniform_sign():
    # R-diagonal sign correction: the first entry has no sign bias
    rng = np.random.default_rng(5)
    signs = [np.sign(random_orthogonal(4, 2, rng)[0, 0]) for _ in range(2000)]
    assert abs(np.mean(signs)) < 0.1


def test_spatial_median_trivial_cases():
    X = np.tile([1.0, -2.0, 3.0], (5, 1))
    np.testing.assert_allclose(spatial_median(X), [1.0, -2.0, 3.0])
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    np.testing.assert_allclose(spatial_median(X), [0.0, 0.0], atol=1e-12)


def test_spatial_median_local_optimality_probe():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((100, 3)) * [1.0, 2.0, 0.5]
    m = spatial_median(X)

    def objective(c):
        return np.linalg.norm(X - c, axis=1).sum()

    base = objective(m)
    perturb = rng.standard_normal((10_000, 3)) * 1e-3
    worse = np.array([objective(m + e) for e in perturb])
    assert np.all(worse >= base - 1e-9)


def test_spatial_median_on_data_point():
    # median sits exactly at a data point carrying most of the mass
    X = np.vstack([np.zeros((6, 2)), [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]])
    np.testing.assert_allclose(spatial_median(X), [0.0, 0.0], atol=1e-8)


def test_spatial_median_orthogonal_equivariance():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((60, 4)) + [3.0, 0.0, -1.0, 2.0]
    P = random_orthogonal(4, 4, rng)
    np.testing.assert_allclose(spatial_median(X @ P.T), P @ spatial_median(X), atol=1e-6)


def test_principal_angles_examples():
    e = np.eye(3)
    R = random_orthogonal(2, 2, np.random.default_rng(8))
    B = random_orthogonal(3, 2, np.random.default_rng(9))
    assert principal_angles(B, B @ R).max() < 1e-12
    assert standardized_last_angle(e[:, :1], e[:, 1:2]) == pytest.approx(1.0)
    diag = ((e[:, 0] + e[:, 1]) / math.sqrt(2))[:, None]
    assert standardized_last_angle(e[:, :1], diag) == pytest.approx(0.5, abs=1e-14)


def test_principal_angles_dimension_mismatch():
    with pytest.raises(ValueError):
        principal_angles(np.eye(3)[:, :1], np.eye(3)[:, :2])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_principal_angles_match_scipy(p, q, seed):
    q = min(q, p)
    rng = np.random.default_rng(seed)
    B1 = random_orthogonal(p, q, rng)
    B2 = random_orthogonal(p, q, rng)
    ours = principal_angles(B1, B2)
    ref = np.sort(scipy.linalg.subspace_angles(B1, B2))
    # scipy can leave arccos rounding (a few 1e-8) on angles that are exactly zero
    np.testing.assert_allclose(ours, ref, atol=1e-7)
    # when 2q > p the spans share at least 2q - p dimensions
    assert np.all(ours[: max(0, 2 * q - p)] < 1e-12)
    np.testing.assert_allclose(principal_angles(B2, B1), ours, atol=1e-12)
    R = random_orthogonal(q, q, rng)
    np.testing.assert_allclose(principal_angles(B1 @ R, B2), ours, atol=1e-10)


def test_principal_angles_small_angle_accuracy():
    theta = 1e-10
    B1 = np.array([[1.0], [0.0]])
    B2 = np.array([[math.cos(theta)], [math.sin(theta)]])
    assert principal_angles(B1, B2)[0] == pytest.approx(theta, rel=1e-6)


def test_solve_scores_least_squares_oracle():
    rng = np.random.default_rng(10)
    Y = rng.standard_normal((20, 5))
    B = rng.standard_normal((5, 2))
    ref = np.linalg.lstsq(B, Y.T, rcond=None)[0].T
    np.testing.assert_allclose(solve_scores(Y, B), ref, atol=1e-12)


def test_als_exact_rank_q():
    rng = np.random.default_rng(11)
    Y = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 6))
    res = als_pca(Y, 2, N3=50, tol=1e-14)
    np.testing.assert_allclose(res.A @ res.B.T, Y, atol=1e-8)
    row_space = np.linalg.svd(Y)[2][:2].T
    assert principal_angles(res.B, row_space).max() < 1e-6


def test_als_q_equals_p_zero_residual():
    rng = np.random.default_rng(12)
    Y = rng.standard_normal((15, 4))
    B0 = random_orthogonal(4, 4, rng)
    B, A = als_pca(Y, 4, B0=B0)
    np.testing.assert_allclose(A @ B.T, Y, atol=1e-10)


def test_als_diagonal_covariance():
    rng = np.random.default_rng(13)
    Y = rng.standard_normal((2000, 4)) * np.sqrt([1.0, 2.0, 8.0, 9.0])
    Y -= Y.mean(axis=0)
    B = als_pca(Y, 2, N3=500, tol=1e-10).B
    oracle = np.linalg.eigh(Y.T @ Y)[1][:, -2:]
    assert principal_angles(B, oracle).max() < 0.05
    assert principal_angles(B, np.eye(4)[:, 2:]).max() < 0.1


def test_als_residual_nonincreasing_and_orthonormal():
    rng = np.random.default_rng(14)
    for _ in range(20):
        Y = rng.standard_normal((25, 7)) * rng.uniform(0.5, 3, 7)
        Y -= Y.mean(axis=0)
        res = als_pca(Y, 3, B0=random_orthogonal(7, 3, rng), N3=40, tol=1e-14)
        h = np.array(res.history)
        assert np.all(h[1:] <= h[:-1] * (1 + 1e-12))
        assert np.linalg.norm(res.B.T @ res.B - np.eye(3)) < 1e-10
        np.testing.assert_allclose(res.A, Y @ res.B, atol=1e-10)


def test_als_start_independence():
    # canonical and random starts reach the same subspace, loose bound: the
    # residual-based stopping rule only pins the angle to about sqrt(tol)
    rng = np.random.default_rng(15)
    for _ in range(10):
        Y = rng.standard_normal((30, 6))
        Y -= Y.mean(axis=0)
        B1 = als_pca(Y, 2, B0=canonical_basis(6, 2), N3=10**6, tol=1e-12).B
        B2 = als_pca(Y, 2, B0=random_orthogonal(6, 2, rng), N3=10**6, tol=1e-12).B
        assert principal_angles(B1, B2).max() < 1e-3


def test_als_singular_gram():
    Y = np.zeros((10, 3))
    Y[:, 0] = np.arange(10.0) - 4.5
    B0 = np.eye(3)[:, 1:2]
    with pytest.raises(DegenerateFitError):
        als_pca(Y, 1, B0=B0, N3=5)
