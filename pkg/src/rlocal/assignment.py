"""Exact linear assignment on small dense square cost matrices.

:func:`lap_min` runs the O(r^3) shortest-augmenting-path Hungarian method
with dual potentials, then walks the tight (zero reduced cost) subgraph to
return the lexicographically smallest optimal assignment. Every optimal
assignment uses only tight edges for any optimal dual, so this refinement
never leaves the optimal face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["AssignmentResult", "assignment_cost", "lap_min", "lap_max"]


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    """Row ``i`` is assigned column ``assignment[i]``."""

    assignment: np.ndarray
    objective: float


def assignment_cost(C, sigma) -> float:
    """Exactly rounded ``sum_i C[i, sigma[i]]``."""
    C = np.asarray(C, dtype=np.float64)
    return math.fsum(C[np.arange(len(sigma)), np.asarray(sigma)].tolist())


def _check_square(C) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] == 0:
        raise ValueError(f"cost matrix must be square and non-empty, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix contains non-finite entries")
    return C


def _hungarian(C: np.ndarray):
    """Return ``(col_of_row, u, v)`` with ``C[i, j] - u[i] - v[j] >= 0``."""
    r = C.shape[0]
    u = np.zeros(r + 1)
    v = np.zeros(r + 1)
    owner = np.zeros(r + 1, dtype=np.int64)  # owner[j]: 1-based row on column j, 0 = free
    way = np.zeros(r + 1, dtype=np.int64)
    cols = np.arange(1, r + 1)
    for i in range(1, r + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(r + 1, np.inf)
        used = np.zeros(r + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            cand = cols[free]
            cur = C[i0 - 1, cand - 1] - u[i0] - v[cand]
            better = cur < minv[cand]
            minv[cand[better]] = cur[better]
            way[cand[better]] = j0
            k = int(np.argmin(minv[cand]))
            j1 = int(cand[k])
            delta = minv[j1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[cand] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    col_of_row = np.empty(r, dtype=np.int64)
    col_of_row[owner[1:] - 1] = np.arange(r)
    return col_of_row, u[1:], v[1:]


def _alternating_path(tight, match, owner, fixed_col, i, j):
    """Rows/columns of a swap giving row `i` column `j`, or ``None``.

    The row currently holding `j` must move along tight edges until some row
    takes the column that `i` releases.
    """
    target = match[i]
    start = owner[j]
    parent = {start: None}
    frontier = [start]
    while frontier:
        nxt = []
        for row in frontier:
            for c in np.flatnonzero(tight[row]):
                if fixed_col[c] or c == j or c == match[row]:
                    continue
                if c == target:
                    chain = [(row, c)]
                    while parent[row] is not None:
                        row, c = parent[row]
                        chain.append((row, c))
                    return chain
                k = owner[c]
                if k == i or k in parent:
                    continue
                parent[k] = (row, c)
                nxt.append(k)
        frontier = nxt
    return None


def lap_min(C) -> AssignmentResult:
    """Minimize ``sum_i C[i, sigma(i)]`` over bijections.

    Ties are broken towards the lexicographically smallest ``sigma``.
    """
    C = _check_square(C)
    r = C.shape[0]
    match, u, v = _hungarian(C)
    best = assignment_cost(C, match)
    if r > 1:
        reduced = C - u[:, None] - v[None, :]
        tol = 1e-9 * (1.0 + float(np.max(np.abs(C))))
        tight = reduced <= tol
        tight[np.arange(r), match] = True
        owner = np.empty(r, dtype=np.int64)
        owner[match] = np.arange(r)
        fixed_col = np.zeros(r, dtype=bool)
        for i in range(r):
            for j in np.flatnonzero(tight[i, : match[i]]):
                if fixed_col[j]:
                    continue
                chain = _alternating_path(tight, match, owner, fixed_col, i, j)
                if chain is None:
                    continue
                trial = match.copy()
                trial[i] = j
                for row, c in chain:
                    trial[row] = c
                cost = assignment_cost(C, trial)
                if cost <= best:
                    match, best = trial, cost
                    owner[match] = np.arange(r)
                    break
            fixed_col[match[i]] = True
    return AssignmentResult(match, best)


def lap_max(C) -> AssignmentResult:
    """Maximize ``sum_i C[i, sigma(i)]``; same tie-break as :func:`lap_min`."""
    C = _check_square(C)
    res = lap_min(-C)
    return AssignmentResult(res.assignment, assignment_cost(C, res.assignment))
