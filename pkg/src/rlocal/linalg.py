"""Least-squares kernels used by the X-update and the image pipeline."""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .core import DimensionError, as_mat

__all__ = ["solve_ls", "solve_ls_prox", "principal_components", "RankError"]


class RankError(ValueError):
    """Requested more components than the data supports."""


def solve_ls(A, RHS) -> np.ndarray:
    """Minimum-norm minimizer of ``||RHS - A X||_F``."""
    A = as_mat(A, "A")
    RHS = as_mat(RHS, "RHS")
    if A.shape[0] != RHS.shape[0]:
        raise DimensionError(f"A has {A.shape[0]} rows but RHS has {RHS.shape[0]}")
    X, *_ = np.linalg.lstsq(A, RHS, rcond=None)
    return X


def solve_ls_prox(A, RHS, lam: float, anchor) -> np.ndarray:
    """Minimize ``||RHS - A X||_F^2 + lam ||X - anchor||_F^2``.

    Solved as the stacked least-squares system ``[A; sqrt(lam) I] X = [RHS;
    sqrt(lam) anchor]`` through a Householder QR factorization, which is
    full column rank for any ``lam > 0``.
    """
    A = as_mat(A, "A")
    RHS = as_mat(RHS, "RHS")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if A.shape[0] != RHS.shape[0]:
        raise DimensionError(f"A has {A.shape[0]} rows but RHS has {RHS.shape[0]}")
    if lam == 0:
        return solve_ls(A, RHS)
    d = A.shape[1]
    anchor = as_mat(anchor, "anchor")
    if anchor.shape != (d, RHS.shape[1]):
        raise DimensionError(f"anchor must be {(d, RHS.shape[1])}, got {anchor.shape}")
    s = np.sqrt(lam)
    stacked = np.vstack([A, s * np.eye(d)])
    rhs = np.vstack([RHS, s * anchor])
    Q, R = sla.qr(stacked, mode="economic")
    return sla.solve_triangular(R, Q.T @ rhs)


def principal_components(data, d: int, rtol: float = 1e-10) -> np.ndarray:
    """Top-`d` principal directions of `data` (samples x features).

    Rows are mean-centered first. Returns a features x d matrix with
    orthonormal columns ordered by decreasing explained variance.
    """
    data = as_mat(data, "data")
    samples, features = data.shape
    if d < 1 or d > min(samples, features):
        raise RankError(f"cannot extract {d} components from {samples}x{features} data")
    centered = data - data.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0 or s[d - 1] <= rtol * s[0]:
        rank = int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0
        raise RankError(f"data has numerical rank {rank} after centering; {d} components requested")
    comps = vt[:d].T
    # fix the sign so the largest-magnitude entry of each component is positive
    idx = np.argmax(np.abs(comps), axis=0)
    signs = np.sign(comps[idx, np.arange(d)])
    return comps * signs


def explained_variance(data, components) -> np.ndarray:
    data = as_mat(data, "data")
    centered = data - data.mean(axis=0)
    proj = centered @ components
    return np.sum(proj**2, axis=0) / max(data.shape[0] - 1, 1)
