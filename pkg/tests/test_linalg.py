import numpy as np
import pytest

from rlocal.core import DimensionError
from rlocal.linalg import RankError, explained_variance, principal_components, solve_ls, solve_ls_prox


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def test_identity_solve():
    Y = np.arange(6.0).reshape(3, 2)
    np.testing.assert_allclose(solve_ls(np.eye(3), Y), Y)


def test_orthonormal_columns(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((10, 4)))
    R = rng.standard_normal((10, 3))
    np.testing.assert_allclose(solve_ls(Q, R), Q.T @ R, atol=1e-12)


def test_construct_then_recover(rng):
    A = rng.standard_normal((20, 5))
    X0 = rng.standard_normal((5, 3))
    X = solve_ls(A, A @ X0)
    assert np.linalg.norm(X - X0) <= 1e-10 * np.linalg.norm(X0)


def test_residual_orthogonal(rng):
    A = rng.standard_normal((30, 6))
    R = rng.standard_normal((30, 4))
    X = solve_ls(A, R)
    assert np.linalg.norm(A.T @ (R - A @ X)) <= 1e-8 * np.linalg.norm(A) * np.linalg.norm(R)


def test_minimum_norm_when_rank_deficient(rng):
    A = rng.standard_normal((8, 2)) @ rng.standard_normal((2, 4))
    R = rng.standard_normal((8, 1))
    X = solve_ls(A, R)
    np.testing.assert_allclose(X, np.linalg.pinv(A) @ R, atol=1e-10)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        solve_ls(np.eye(3), np.ones((4, 1)))
    with pytest.raises(DimensionError):
        solve_ls_prox(np.eye(3), np.ones((3, 1)), 1.0, np.ones((2, 1)))


def test_prox_lambda_zero_reduces(rng):
    A = rng.standard_normal((12, 3))
    R = rng.standard_normal((12, 2))
    np.testing.assert_allclose(solve_ls_prox(A, R, 0.0, np.zeros((3, 2))), solve_ls(A, R))


def test_prox_huge_lambda_returns_anchor(rng):
    A = rng.standard_normal((12, 3))
    R = rng.standard_normal((12, 2))
    anchor = rng.standard_normal((3, 2))
    X = solve_ls_prox(A, R, 1e12, anchor)
    assert np.linalg.norm(X - anchor) <= 1e-4 * np.linalg.norm(anchor)


def test_prox_stationarity(rng):
    for _ in range(10):
        A = rng.standard_normal((30, 6))
        R = rng.standard_normal((30, 3))
        anchor = rng.standard_normal((6, 3))
        lam = 2.0
        X = solve_ls_prox(A, R, lam, anchor)
        grad = 2 * A.T @ (A @ X - R) + 2 * lam * (X - anchor)
        assert np.max(np.abs(grad)) <= 1e-8


def test_prox_unique_for_rank_deficient(rng):
    A = np.zeros((5, 3))
    anchor = rng.standard_normal((3, 1))
    np.testing.assert_allclose(solve_ls_prox(A, np.ones((5, 1)), 0.5, anchor), anchor)


def test_prox_monotone_in_lambda(rng):
    A = rng.standard_normal((15, 4))
    R = rng.standard_normal((15, 2))
    anchor = rng.standard_normal((4, 2))
    dist = [np.linalg.norm(solve_ls_prox(A, R, lam, anchor) - anchor) for lam in (1e-3, 0.1, 1, 10, 1e3)]
    assert all(a >= b - 1e-10 for a, b in zip(dist, dist[1:]))


def test_pca_line_through_origin(rng):
    direction = np.array([1.0, -2.0, 0.5])
    direction /= np.linalg.norm(direction)
    data = rng.standard_normal((40, 1)) * direction
    comp = principal_components(data, 1)[:, 0]
    assert abs(comp @ direction) >= 1 - 1e-8


def test_pca_orthonormal_and_ordered(rng):
    data = rng.standard_normal((50, 12)) * np.linspace(3, 0.5, 12)
    B = principal_components(data, 4)
    assert B.shape == (12, 4)
    np.testing.assert_allclose(B.T @ B, np.eye(4), atol=1e-10)
    var = explained_variance(data, B)
    assert np.all(np.diff(var) <= 1e-12)


def test_pca_degenerate():
    data = np.tile([1.0, 2.0, 3.0], (5, 1))
    with pytest.raises(RankError):
        principal_components(data, 1)
    rank_one = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    assert principal_components(rank_one, 1).shape == (3, 1)
    with pytest.raises(RankError):
        principal_components(rank_one, 2)


def test_pca_too_many_components(rng):
    with pytest.raises(RankError):
        principal_components(rng.standard_normal((3, 10)), 4)
