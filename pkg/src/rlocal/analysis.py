"""Permutation-entropy recovery bounds and evaluation metrics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BlockPermutation, DimensionError

__all__ = [
    "PermutationPrior",
    "BoundCurve",
    "entropy_bits",
    "error_lower_bound",
    "bound_curve",
    "hamming_distortion",
    "relative_error",
    "snr_of",
    "psnr",
    "count_displaced_exact",
]


def _log2_factorial_range(lo: int, hi: int) -> float:
    """``sum_{i=lo}^{hi} log2 i`` (0 for an empty range)."""
    if hi < max(lo, 2):
        return 0.0
    return math.fsum(np.log2(np.arange(max(lo, 2), hi + 1, dtype=np.float64)).tolist())


@dataclass(frozen=True)
class PermutationPrior:
    """Uniform prior over one of the permutation families.

    ``model`` is ``"unrestricted"``, ``"r_local"`` (uses `r`) or
    ``"k_sparse"`` (uses `k`).
    """

    model: str
    n: int
    r: int = 0
    k: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.model == "r_local":
            if self.r < 1 or self.n % self.r:
                raise ValueError(f"r={self.r} must divide n={self.n}")
        elif self.model == "k_sparse":
            if not 0 <= self.k <= self.n:
                raise ValueError(f"k={self.k} must lie in [0, n]")
        elif self.model != "unrestricted":
            raise ValueError(f"unknown permutation model {self.model!r}")

    @property
    def label(self) -> str:
        if self.model == "r_local":
            return f"r_local(r={self.r})"
        if self.model == "k_sparse":
            return f"k_sparse(k={self.k})"
        return "unrestricted"


def entropy_bits(prior: PermutationPrior) -> float:
    n = prior.n
    if prior.model == "unrestricted":
        return _log2_factorial_range(2, n)
    if prior.model == "r_local":
        return (n // prior.r) * _log2_factorial_range(2, prior.r)
    # n! / (n - k)! as printed, not the exact count of k-displaced permutations
    return _log2_factorial_range(n - prior.k + 1, n)


def error_lower_bound(n: int, m: int, snr: float, prior: PermutationPrior) -> float:
    """Fano-type lower bound on ``Pr{P_hat != P*}``; may be negative (vacuous)."""
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    H = entropy_bits(prior)
    if H <= 0:
        raise ValueError(f"{prior.label} has zero entropy; the bound is undefined")
    return 1.0 - (1.0 + 0.5 * n * m * math.log2(1.0 + snr)) / H


@dataclass
class BoundCurve:
    n: int
    m: int
    prior: PermutationPrior
    snr_grid: list[float]
    lower_bounds: list[float] = field(default_factory=list)

    def clamped(self) -> list[float]:
        return [max(0.0, b) for b in self.lower_bounds]


def bound_curve(n: int, m: int, snr_grid: Sequence[float], prior: PermutationPrior) -> BoundCurve:
    grid = [float(s) for s in snr_grid]
    return BoundCurve(n, m, prior, grid, [error_lower_bound(n, m, s, prior) for s in grid])


def _row_columns(P) -> np.ndarray:
    if isinstance(P, BlockPermutation):
        return P.row_columns()
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionError("dense permutation must be square")
    return np.argmax(P, axis=1)


def hamming_distortion(P_hat, P_star) -> int:
    """Rows whose assigned column differs; partitions may differ."""
    a, b = _row_columns(P_hat), _row_columns(P_star)
    if a.shape != b.shape:
        raise DimensionError(f"permutation sizes differ: {a.shape[0]} vs {b.shape[0]}")
    return int(np.sum(a != b))


def relative_error(X_hat, X_star) -> float:
    X_hat = np.asarray(X_hat, dtype=np.float64)
    X_star = np.asarray(X_star, dtype=np.float64)
    if X_hat.shape != X_star.shape:
        raise DimensionError(f"shapes differ: {X_hat.shape} vs {X_star.shape}")
    return float(np.linalg.norm(X_hat - X_star) / np.linalg.norm(X_star))


def snr_of(X_star, m: int, sigma2: float) -> float:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return float(np.sum(np.asarray(X_star, dtype=np.float64) ** 2) / (m * sigma2))


def psnr(y, y_hat, n=None) -> float:
    """``10 log10(1 / e^2)`` with ``e`` the mean squared error; ``inf`` when exact."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.shape != y_hat.shape:
        raise DimensionError("images differ in size")
    n = y.shape[0] if n is None else n
    e = float(np.sum((y - y_hat) ** 2)) / n
    if e == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / e**2)


def count_displaced_exact(n: int, k: int) -> int:
    """Brute-force count of permutations of ``n`` with exactly ``k`` non-fixed points.

    Documentation aid only: this is ``C(n, k) * D(k)`` and differs from the
    ``n! / (n - k)!`` count used by :func:`entropy_bits`.
    """
    if n > 8:
        raise ValueError("brute force limited to n <= 8")
    return sum(
        1 for p in itertools.permutations(range(n)) if sum(i != j for i, j in enumerate(p)) == k
    )
