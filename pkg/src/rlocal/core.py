"""Shared domain types: block partitions, block-local permutations and
sensing instances.

Matrices are plain ``float64`` numpy arrays; :func:`as_mat` is the single
validation point. A permutation ``p`` moves source row ``i`` of a matrix to
destination row ``sigma(i)``, so its dense form has ``P[sigma(i), i] = 1`` and
``p @ M`` is computed by :func:`apply_permutation` without materializing ``P``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "DimensionError",
    "PartitionMismatch",
    "as_mat",
    "BlockPartition",
    "BlockPermutation",
    "GroundTruth",
    "SenseInstance",
    "permutation_to_dense",
    "permutation_from_dense",
    "apply_permutation",
    "compose",
    "invert",
]


class DimensionError(ValueError):
    """Raised when matrix shapes are inconsistent."""


class PartitionMismatch(ValueError):
    """Raised when two permutations live on different partitions."""


def as_mat(a, name: str = "matrix") -> np.ndarray:
    """Return `a` as a finite 2-d float64 array (1-d input becomes a column)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class BlockPartition:
    """Consecutive row blocks of sizes ``sizes`` tiling ``range(n)``."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) == 0:
            raise ValueError("partition needs at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform(cls, n: int, r: int) -> "BlockPartition":
        if r < 1 or n % r:
            raise ValueError(f"block size {r} does not divide n={n}")
        return cls((r,) * (n // r))

    @classmethod
    def parse(cls, text: str, n: Optional[int] = None) -> "BlockPartition":
        """Parse ``"r=25"`` / ``"25"`` (uniform, needs `n`) or ``"3,2,1"``."""
        text = text.strip()
        if text.startswith("r="):
            text = text[2:]
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) == 1 and n is not None:
            return cls.uniform(n, int(parts[0]))
        return cls(tuple(int(p) for p in parts))

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def num_blocks(self) -> int:
        return len(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        """Start row of each block, plus a trailing ``n``."""
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    def slices(self) -> list[slice]:
        off = self.offsets
        return [slice(int(off[b]), int(off[b + 1])) for b in range(self.num_blocks)]

    def block_of(self) -> np.ndarray:
        """Block index of every row."""
        return np.repeat(np.arange(self.num_blocks), self.sizes)

    def __str__(self):
        return ",".join(str(s) for s in self.sizes)


@dataclass(frozen=True, eq=False)
class BlockPermutation:
    """Block-diagonal permutation stored as per-block index arrays.

    ``assignments[b][i]`` is the within-block destination of within-block
    source row ``i``.
    """

    partition: BlockPartition
    assignments: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.assignments) != self.partition.num_blocks:
            raise ValueError("one assignment array per block is required")
        frozen = []
        for size, sigma in zip(self.partition.sizes, self.assignments):
            sigma = np.array(sigma, dtype=np.int64).reshape(-1)
            if sigma.shape[0] != size or not np.array_equal(np.sort(sigma), np.arange(size)):
                raise ValueError(f"block assignment {sigma.tolist()} is not a bijection on {size} rows")
            sigma.setflags(write=False)
            frozen.append(sigma)
        object.__setattr__(self, "assignments", tuple(frozen))

    @classmethod
    def identity(cls, partition: BlockPartition) -> "BlockPermutation":
        return cls(partition, tuple(np.arange(s) for s in partition.sizes))

    @classmethod
    def from_global(cls, partition: BlockPartition, sigma) -> "BlockPermutation":
        """Build from a length-n destination array that respects `partition`."""
        sigma = np.asarray(sigma, dtype=np.int64)
        if sigma.shape != (partition.n,):
            raise DimensionError(f"expected {partition.n} destinations, got shape {sigma.shape}")
        blocks = []
        for sl in partition.slices():
            local = sigma[sl] - sl.start
            if np.any(local < 0) or np.any(local >= sl.stop - sl.start):
                raise ValueError("permutation moves rows across block boundaries")
            blocks.append(local)
        return cls(partition, tuple(blocks))

    @property
    def n(self) -> int:
        return self.partition.n

    def destinations(self) -> np.ndarray:
        """Global destination row of every source row."""
        off = self.partition.offsets
        return np.concatenate([sigma + off[b] for b, sigma in enumerate(self.assignments)])

    def row_columns(self) -> np.ndarray:
        """Column index of the 1 in each row of the dense matrix."""
        dest = self.destinations()
        cols = np.empty_like(dest)
        cols[dest] = np.arange(dest.shape[0])
        return cols

    def is_identity(self) -> bool:
        return all(np.array_equal(s, np.arange(s.shape[0])) for s in self.assignments)

    def __eq__(self, other):
        if not isinstance(other, BlockPermutation):
            return NotImplemented
        return self.partition == other.partition and all(
            np.array_equal(a, b) for a, b in zip(self.assignments, other.assignments)
        )

    def __hash__(self):
        return hash((self.partition, tuple(a.tobytes() for a in self.assignments)))

    def __repr__(self):
        return f"BlockPermutation(partition={self.partition.sizes}, assignments={[a.tolist() for a in self.assignments]})"


def permutation_to_dense(p: BlockPermutation) -> np.ndarray:
    P = np.zeros((p.n, p.n))
    P[p.destinations(), np.arange(p.n)] = 1.0
    return P


def permutation_from_dense(P, partition: Optional[BlockPartition] = None) -> BlockPermutation:
    """Inverse of :func:`permutation_to_dense`; defaults to a single block."""
    P = np.asarray(P)
    n = P.shape[0]
    if P.shape != (n, n):
        raise DimensionError("permutation matrix must be square")
    ok = np.isin(P, (0, 1)).all() and (P.sum(axis=0) == 1).all() and (P.sum(axis=1) == 1).all()
    if not ok:
        raise ValueError("not a permutation matrix")
    if partition is None:
        partition = BlockPartition((n,))
    return BlockPermutation.from_global(partition, np.argmax(P, axis=0))


def apply_permutation(p: BlockPermutation, M) -> np.ndarray:
    """Return ``P @ M``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 0 or M.shape[0] != p.n:
        raise DimensionError(f"permutation of size {p.n} cannot act on {M.shape[0] if M.ndim else 0} rows")
    out = np.empty_like(M)
    out[p.destinations()] = M
    return out


def compose(p: BlockPermutation, q: BlockPermutation) -> BlockPermutation:
    """Return ``p o q`` (apply `q` first), i.e. the dense product ``P @ Q``."""
    if p.partition != q.partition:
        raise PartitionMismatch(f"partitions differ: {p.partition.sizes} vs {q.partition.sizes}")
    return BlockPermutation(p.partition, tuple(a[b] for a, b in zip(p.assignments, q.assignments)))


def invert(p: BlockPermutation) -> BlockPermutation:
    blocks = []
    for sigma in p.assignments:
        inv = np.empty_like(sigma)
        inv[sigma] = np.arange(sigma.shape[0])
        blocks.append(inv)
    return BlockPermutation(p.partition, tuple(blocks))


@dataclass(frozen=True)
class GroundTruth:
    Pstar: BlockPermutation
    Xstar: np.ndarray
    sigma2: float = 0.0


@dataclass(frozen=True, eq=False)
class SenseInstance:
    """Observations ``Y = P* B X* + W`` with optional ground truth."""

    B: np.ndarray
    Y: np.ndarray
    partition: BlockPartition
    truth: Optional[GroundTruth] = field(default=None)

    def __post_init__(self):
        B = as_mat(self.B, "B")
        Y = as_mat(self.Y, "Y")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Y", Y)
        n = self.partition.n
        if B.shape[0] != n or Y.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows and Y has {Y.shape[0]} rows; partition covers {n}")
        if self.truth is not None:
            X = as_mat(self.truth.Xstar, "Xstar")
            if X.shape != (B.shape[1], Y.shape[1]):
                raise DimensionError(f"Xstar shape {X.shape} inconsistent with B {B.shape} and Y {Y.shape}")
            if self.truth.Pstar.partition.n != n:
                raise DimensionError("Pstar size does not match the instance")
            if self.truth.sigma2 < 0:
                raise ValueError("sigma2 must be nonnegative")

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

