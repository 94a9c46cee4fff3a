"""Proximal alternating minimization for r-local unlabeled sensing."""

__version__ = "0.1.0"

from .assignment import AssignmentResult, lap_max, lap_min
from .core import (
    BlockPartition,
    BlockPermutation,
    GroundTruth,
    SenseInstance,
    apply_permutation,
    compose,
    invert,
    permutation_from_dense,
    permutation_to_dense,
)
from .pam import PamConfig, PamResult, run_pam

__all__ = [
    "AssignmentResult",
    "BlockPartition",
    "BlockPermutation",
    "GroundTruth",
    "PamConfig",
    "PamResult",
    "SenseInstance",
    "apply_permutation",
    "compose",
    "invert",
    "lap_max",
    "lap_min",
    "permutation_from_dense",
    "permutation_to_dense",
    "run_pam",
]
