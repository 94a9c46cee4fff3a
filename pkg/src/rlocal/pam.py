"""Proximal alternating minimization for r-local unlabeled sensing.

Minimizes ``F(X, P) = ||Y - P B X||_F^2`` over signals ``X`` and
block-diagonal permutations ``P``. Each round solves one linear assignment
per block (P-update) followed by a proximally regularized least-squares
problem (X-update), with the proximal weight divided by ``lambda_decay``
after every round.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assignment import lap_max
from .core import (
    BlockPartition,
    BlockPermutation,
    DimensionError,
    SenseInstance,
    apply_permutation,
    invert,
)
from .linalg import solve_ls, solve_ls_prox

__all__ = [
    "PamConfig",
    "PamResult",
    "SolverError",
    "UnderdeterminedWarning",
    "collapse",
    "collapsed_init",
    "objective",
    "p_update",
    "x_update",
    "run_pam",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The objective or the assignment gains became non-finite."""


class UnderdeterminedWarning(UserWarning):
    """Fewer blocks than unknowns in the collapsed system."""


@dataclass(frozen=True)
class PamConfig:
    lambda_init: float = 100.0
    lambda_decay: float = 10.0
    lambda_floor: float = 1e-8
    epsilon: float = 0.01
    max_iters: int = 100
    # stop once F <= objective_floor * ||Y||_F^2 (exact fit up to rounding)
    objective_floor: float = 1e-24
    # provenance only: the iteration itself draws no random numbers
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_init > 0:
            raise ValueError("lambda_init must be positive")
        if not self.lambda_decay > 1:
            raise ValueError("lambda_decay must exceed 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.lambda_floor < 0 or self.objective_floor < 0:
            raise ValueError("floors must be nonnegative")


@dataclass
class PamResult:
    P_hat: BlockPermutation
    X_hat: np.ndarray
    objective_trace: list[float]
    iterations: int
    converged: bool
    stop_reason: str
    lambdas: list[float] = field(default_factory=list)
    # rows of P_hat that changed in each round (round 1 compares to no permutation)
    p_changes: list[int] = field(default_factory=list)
    x_steps: list[float] = field(default_factory=list)
    init_underdetermined: bool = False

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]

    def stabilization(self, window: int = 3) -> int:
        """Rows of P_hat that moved over the last `window` rounds."""
        return int(sum(self.p_changes[-window:])) if len(self.p_changes) > 1 else 0


def objective(instance: SenseInstance, P: BlockPermutation, X) -> float:
    resid = instance.Y - apply_permutation(P, instance.B @ X)
    return float(np.sum(resid * resid))


def collapse(B, Y, partition: BlockPartition):
    """Sum the rows of every block of `B` and `Y`.

    Block sums are invariant under any permutation local to the partition.
    """
    idx = partition.offsets[:-1]
    return np.add.reduceat(B, idx, axis=0), np.add.reduceat(Y, idx, axis=0)


def collapsed_init(instance: SenseInstance) -> np.ndarray:
    """Initial signal from the collapsed (block-summed) least-squares system.

    Emits :class:`UnderdeterminedWarning` when there are fewer blocks than
    columns of ``B``; the minimum-norm solution is returned in that case.
    """
    Bc, Yc = collapse(instance.B, instance.Y, instance.partition)
    if instance.partition.num_blocks < instance.d or np.linalg.matrix_rank(Bc) < instance.d:
        warnings.warn(
            f"collapsed system has rank {np.linalg.matrix_rank(Bc)} < d={instance.d}; "
            "using the minimum-norm estimate",
            UnderdeterminedWarning,
            stacklevel=2,
        )
    return solve_ls(Bc, Yc)


def _block_gain(Y, Y_hat, sl, prev, lam):
    G = Y[sl] @ Y_hat[sl].T
    if lam:
        if prev is None:
            G = G + lam / G.shape[0]
        else:
            G[prev, np.arange(G.shape[0])] += lam
    return G


def p_update(
    Y,
    Y_hat,
    P_prev: Optional[BlockPermutation],
    lam: float,
    partition: BlockPartition,
) -> BlockPermutation:
    """Blockwise maximizer of ``<Y Y_hat^T + lam P_prev, P>``.

    ``P_prev=None`` stands for the uniform doubly stochastic start
    ``1/r_b`` in every block.
    """
    Y = np.asarray(Y, dtype=np.float64)
    Y_hat = np.asarray(Y_hat, dtype=np.float64)
    if Y.shape != Y_hat.shape or Y.shape[0] != partition.n:
        raise DimensionError(f"Y {Y.shape} and Y_hat {Y_hat.shape} must match and cover {partition.n} rows")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if P_prev is not None and P_prev.partition != partition:
        raise DimensionError("previous permutation lives on a different partition")
    blocks = []
    for b, sl in enumerate(partition.slices()):
        prev = None if P_prev is None else P_prev.assignments[b]
        # G[i, j]: gain of placing model row j at observed row i
        with np.errstate(over="ignore", invalid="ignore"):
            G = _block_gain(Y, Y_hat, sl, prev, lam)
        if not np.all(np.isfinite(G)):
            raise SolverError(f"non-finite assignment gains in block {b}")
        blocks.append(lap_max(G).assignment)
    # LAP gives, per observed row, its source row; store source -> destination
    return invert(BlockPermutation(partition, tuple(blocks)))


def x_update(instance: SenseInstance, P: BlockPermutation, lam: float, X_prev) -> np.ndarray:
    return solve_ls_prox(instance.B, apply_permutation(invert(P), instance.Y), lam, X_prev)


def run_pam(instance: SenseInstance, config: PamConfig = PamConfig()) -> PamResult:
    B, Y, part = instance.B, instance.Y, instance.partition
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnderdeterminedWarning)
        X = collapsed_init(instance)
    underdetermined = any(issubclass(w.category, UnderdeterminedWarning) for w in caught)
    Y_hat = B @ X
    with np.errstate(over="ignore"):
        floor = config.objective_floor * float(np.sum(Y * Y))

    P: Optional[BlockPermutation] = None
    lam = config.lambda_init
    trace: list[float] = []
    lambdas: list[float] = []
    changes: list[int] = []
    steps: list[float] = []
    converged = False
    reason = "max_iters"
    for t in range(1, config.max_iters + 1):
        P_new = p_update(Y, Y_hat, P, lam, part)
        X_new = x_update(instance, P_new, lam, X)
        Y_hat = B @ X_new
        F = objective(instance, P_new, X_new)
        if not np.isfinite(F):
            raise SolverError(f"non-finite objective at iteration {t} (lambda={lam:g})")
        changes.append(
            part.n if P is None else int(np.sum(P_new.destinations() != P.destinations()))
        )
        steps.append(float(np.sum((X_new - X) ** 2)))
        lambdas.append(lam)
        P, X = P_new, X_new
        trace.append(F)
        log.debug("iter %d  lambda=%.3g  F=%.6g  moved=%d", t, lam, F, changes[-1])
        if F <= floor:
            converged, reason = True, "tolerance"
            break
        if len(trace) > 1 and (trace[-2] - F) / trace[-2] <= config.epsilon:
            converged, reason = True, "tolerance"
            break
        lam = max(lam / config.lambda_decay, config.lambda_floor)

    return PamResult(
        P_hat=P,
        X_hat=X,
        objective_trace=trace,
        iterations=len(trace),
        converged=converged,
        stop_reason=reason,
        lambdas=lambdas,
        p_changes=changes,
        x_steps=steps,
        init_underdetermined=underdetermined,
    )
