"""1-d unassigned distance geometry posed as unlabeled sensing.

Points are kept in a canonical frame: sorted in decreasing order with the
leftmost point at the origin. With ``x`` the first ``d - 1`` canonical
coordinates, the vector of all pairwise differences is ``build_Bu(d) @ x``,
ordered as: distances to the origin point, then for each point ``i`` (from
the largest) its distances to all points between it and the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import BlockPartition, BlockPermutation, GroundTruth, SenseInstance, apply_permutation
from .pam import PamConfig, PamResult, run_pam

__all__ = [
    "UdgpInstance",
    "build_Bu",
    "pair_index",
    "canonical_coords",
    "udgp_partition",
    "make_udgp_instance",
    "recover_points",
    "UdgpRecovery",
]


def build_Bu(d: int) -> np.ndarray:
    """Structured sensing matrix mapping ``d - 1`` coordinates to all distances."""
    if d < 2:
        raise ValueError("need at least two points")
    rows = [np.eye(d - 1)]
    for i in range(2, d):
        block = np.zeros((d - i, d - 1))
        p = np.arange(d - i)
        block[:, i - 2] = 1.0
        block[p, p + i - 1] = -1.0
        rows.append(block)
    return np.vstack(rows)


def pair_index(d: int) -> list[tuple[int, int]]:
    """``(i, j)`` (0-based, ``i < j``) point pair behind each row of ``build_Bu(d)``.

    Index ``d - 1`` is the origin point.
    """
    pairs = [(q, d - 1) for q in range(d - 1)]
    for i in range(2, d):
        pairs.extend((i - 2, i - 2 + p) for p in range(1, d - i + 1))
    return pairs


def udgp_partition(d: int) -> BlockPartition:
    """Blocks ``(d-1, d-2, ..., 1)``, one per row group of ``build_Bu(d)``."""
    return BlockPartition(tuple(range(d - 1, 0, -1)))


def canonical_coords(coords) -> np.ndarray:
    """Translate so the minimum is 0 and sort decreasing."""
    x = np.asarray(coords, dtype=np.float64).reshape(-1)
    return np.sort(x - x.min())[::-1]


@dataclass(frozen=True, eq=False)
class UdgpInstance:
    d: int
    distances: np.ndarray
    partition: BlockPartition
    sigma2: float = 0.0
    coords: Optional[np.ndarray] = None
    Pstar: Optional[BlockPermutation] = None
    resampled: int = 0

    def __post_init__(self):
        dist = np.asarray(self.distances, dtype=np.float64).reshape(-1)
        if dist.shape[0] != self.d * (self.d - 1) // 2:
            raise ValueError(f"{self.d} points need {self.d * (self.d - 1) // 2} distances, got {dist.shape[0]}")
        if self.partition.n != dist.shape[0]:
            raise ValueError("partition does not cover the distance vector")
        object.__setattr__(self, "distances", dist)

    @property
    def x_star(self) -> Optional[np.ndarray]:
        return None if self.coords is None else self.coords[:-1]

    def to_sense(self) -> SenseInstance:
        truth = None
        if self.coords is not None and self.Pstar is not None:
            truth = GroundTruth(self.Pstar, self.x_star[:, None], self.sigma2)
        return SenseInstance(build_Bu(self.d), self.distances[:, None], self.partition, truth)


def _sample_points(d, variance, rng, min_gap=1e-12, max_tries=100):
    for attempt in range(max_tries):
        pts = rng.normal(0.0, np.sqrt(variance), size=d)
        if np.min(np.diff(np.sort(pts))) > min_gap:
            return pts, attempt
    raise RuntimeError("could not sample distinct points")


def make_udgp_instance(
    coords: Optional[Sequence[float]] = None,
    *,
    d: Optional[int] = None,
    variance: float = 1.0,
    sigma2: float = 0.0,
    seed=None,
    partition: Optional[BlockPartition] = None,
    Pstar: Optional[BlockPermutation] = None,
) -> UdgpInstance:
    """Shuffled (and optionally noisy) distance vector for a point set.

    Either pass `coords` or `d` (points drawn i.i.d. normal with the given
    `variance`; near-duplicates are resampled). `Pstar` defaults to a
    uniformly random permutation local to `partition`.
    """
    rng = np.random.default_rng(seed)
    resampled = 0
    if coords is None:
        if d is None:
            raise ValueError("pass coords or d")
        coords, resampled = _sample_points(d, variance, rng)
    x_bar = canonical_coords(coords)
    d = x_bar.shape[0]
    if d < 2:
        raise ValueError("need at least two points")
    if partition is None:
        partition = udgp_partition(d)
    if Pstar is None:
        Pstar = BlockPermutation(partition, tuple(rng.permutation(s) for s in partition.sizes))
    elif Pstar.partition != partition:
        raise ValueError("Pstar must live on the instance partition")
    y = apply_permutation(Pstar, build_Bu(d) @ x_bar[:-1])
    if sigma2 > 0:
        y = y + rng.normal(0.0, np.sqrt(sigma2), size=y.shape)
    return UdgpInstance(d, y, partition, sigma2, x_bar, Pstar, resampled)


@dataclass
class UdgpRecovery:
    coords: np.ndarray
    relative_error: Optional[float]
    result: PamResult


def recover_points(instance: UdgpInstance, config: PamConfig = PamConfig()) -> UdgpRecovery:
    sense = instance.to_sense()
    res = run_pam(sense, config)
    est = canonical_coords(np.append(res.X_hat[:, 0], 0.0))
    err = None
    if instance.coords is not None:
        err = float(np.linalg.norm(est - instance.coords) / np.linalg.norm(instance.coords))
    return UdgpRecovery(est, err, res)
