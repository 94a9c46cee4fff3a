"""Monte-Carlo drivers behind the CLI commands.

Each driver returns plain row dicts in deterministic grid order. Wall-clock
timings are kept apart from the rows so that result tables are
byte-reproducible.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import (
    PermutationPrior,
    bound_curve,
    entropy_bits,
    hamming_distortion,
    psnr,
    relative_error,
)
from .core import BlockPartition, BlockPermutation, SenseInstance, apply_permutation, invert
from .linalg import principal_components
from .pam import PamConfig, SolverError, run_pam
from .synth import GenSpec, gen_instance, sample_r_local, trial_rng
from .udgp import make_udgp_instance, recover_points

__all__ = [
    "BENCH_COLUMNS",
    "UDGP_COLUMNS",
    "BOUND_COLUMNS",
    "bench_trial",
    "run_bench",
    "udgp_trial",
    "run_udgp",
    "run_bounds",
    "unscramble",
    "UnscrambleResult",
    "summarize",
]

BENCH_COLUMNS = [
    "n", "d", "m", "r", "snr", "trial", "d_H", "d_H_over_n", "relative_error",
    "F_first", "F_final", "iterations", "converged", "stop_reason", "status",
]
UDGP_COLUMNS = [
    "d", "variance", "sigma2", "trial", "relative_error", "d_H", "F_final",
    "iterations", "converged", "status",
]
BOUND_COLUMNS = ["prior", "n", "m", "entropy_bits", "snr", "lower_bound", "lower_bound_clamped"]


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def _pam_summary(res) -> dict:
    return {
        "F_first": res.objective_trace[0],
        "F_final": res.final_objective,
        "iterations": res.iterations,
        "converged": res.converged,
        "stop_reason": res.stop_reason,
    }


def bench_trial(job) -> tuple[dict, float]:
    """One synthetic instance: ``job = (point_index, point, trial, seed, pam)``."""
    idx, point, trial, seed, pam = job
    n, d, m, r, snr = point
    row = {"n": n, "d": d, "m": m, "r": r, "snr": snr, "trial": trial}
    t0 = time.perf_counter()
    try:
        # stream key (grid point, trial) keeps trials independent across the grid
        spec = GenSpec(n=n, d=d, m=m, r=r, snr=snr, seed=seed)
        inst = gen_instance(spec, idx, trial)
        res = run_pam(inst, PamConfig(**pam))
        dh = hamming_distortion(res.P_hat, inst.truth.Pstar)
        row.update(
            d_H=dh,
            d_H_over_n=dh / n,
            relative_error=relative_error(res.X_hat, inst.truth.Xstar),
            status="ok",
            **_pam_summary(res),
        )
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        row["status"] = f"error: {exc}"
    return row, time.perf_counter() - t0


def run_bench(grid: dict, trials: int, seed: int, pam: Optional[dict] = None, threads: int = 1):
    """Cartesian product over ``grid`` keys ``n, d, m, r, snr``; returns (rows, timings)."""
    points = list(itertools.product(grid["n"], grid["d"], grid["m"], grid["r"], grid["snr"]))
    jobs = [(i, p, t, seed, dict(pam or {})) for i, p in enumerate(points) for t in range(trials)]
    out = _map(bench_trial, jobs, threads)
    return [row for row, _ in out], [dt for _, dt in out]


def udgp_trial(job) -> tuple[dict, float]:
    idx, (d, variance, sigma2), trial, seed, pam = job
    row = {"d": d, "variance": variance, "sigma2": sigma2, "trial": trial}
    t0 = time.perf_counter()
    try:
        # points and shuffles depend on (variance, trial) only, so noise levels share them
        rng = trial_rng(seed, idx, trial)
        inst = make_udgp_instance(d=d, variance=variance, sigma2=sigma2, seed=rng)
        rec = recover_points(inst, PamConfig(**pam))
        row.update(
            relative_error=rec.relative_error,
            d_H=hamming_distortion(rec.result.P_hat, inst.Pstar),
            F_final=rec.result.final_objective,
            iterations=rec.result.iterations,
            converged=rec.result.converged,
            status="ok",
        )
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        row["status"] = f"error: {exc}"
    return row, time.perf_counter() - t0


def run_udgp(
    d: int,
    variances: Sequence[float],
    sigma2s: Sequence[float],
    trials: int,
    seed: int,
    pam: Optional[dict] = None,
    threads: int = 1,
):
    jobs = []
    for vi, var in enumerate(variances):
        for s2 in sigma2s:
            jobs.extend((vi, (d, var, s2), t, seed, dict(pam or {})) for t in range(trials))
    out = _map(udgp_trial, jobs, threads)
    return [row for row, _ in out], [dt for _, dt in out]


def run_bounds(n: int, m: int, snr_grid: Sequence[float], priors: Sequence[PermutationPrior]) -> list[dict]:
    rows = []
    for prior in priors:
        H = entropy_bits(prior)
        curve = bound_curve(n, m, snr_grid, prior)
        for snr, raw, clamped in zip(curve.snr_grid, curve.lower_bounds, curve.clamped()):
            rows.append(
                {
                    "prior": prior.label,
                    "n": n,
                    "m": m,
                    "entropy_bits": H,
                    "snr": snr,
                    "lower_bound": raw,
                    "lower_bound_clamped": clamped,
                }
            )
    return rows


@dataclass
class UnscrambleResult:
    P_star: BlockPermutation
    P_hat: BlockPermutation
    scrambled: np.ndarray
    reconstructed: np.ndarray
    psnr: float
    d_H: int
    iterations: int


def unscramble(
    train,
    target,
    d: int,
    partition: BlockPartition,
    config: PamConfig = PamConfig(),
    seed=0,
    P_star: Optional[BlockPermutation] = None,
) -> UnscrambleResult:
    """Scramble `target` with an r-local permutation and undo it.

    `train` holds one flattened image per row; the sensing matrix is its
    top-`d` principal components and the target is a single view (m = 1).
    """
    train = np.asarray(train, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64).reshape(-1)
    if train.ndim != 2 or train.shape[1] != y.shape[0]:
        raise ValueError(f"training images have {train.shape[-1]} pixels, target has {y.shape[0]}")
    if partition.n != y.shape[0]:
        raise ValueError(f"partition covers {partition.n} pixels, image has {y.shape[0]}")
    B = principal_components(train, d)
    if P_star is None:
        P_star = sample_r_local(partition, seed)
    scrambled = apply_permutation(P_star, y)
    res = run_pam(SenseInstance(B, scrambled, partition), config)
    recon = apply_permutation(invert(res.P_hat), scrambled)
    return UnscrambleResult(
        P_star=P_star,
        P_hat=res.P_hat,
        scrambled=scrambled,
        reconstructed=recon,
        psnr=psnr(y, recon),
        d_H=hamming_distortion(res.P_hat, P_star),
        iterations=res.iterations,
    )


def summarize(rows: Sequence[dict], keys: Sequence[str], value: str) -> list[dict]:
    """Mean and sample std of `value` grouped by `keys` (ok rows only)."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        if row.get("status", "ok") != "ok":
            continue
        groups.setdefault(tuple(row[k] for k in keys), []).append(float(row[value]))
    out = []
    for key, vals in groups.items():
        arr = np.array(vals)
        out.append(
            dict(zip(keys, key), mean=float(arr.mean()), std=float(arr.std(ddof=1)) if len(arr) > 1 else 0.0, count=len(arr))
        )
    return out
