import itertools

import numpy as np
import pytest

from rlocal.core import BlockPartition, BlockPermutation, apply_permutation, invert
from rlocal.udgp import (
    build_Bu,
    canonical_coords,
    make_udgp_instance,
    pair_index,
    recover_points,
    udgp_partition,
)

# the d = 4 matrix as displayed for the points (0, 3, 7, 9)
BU4 = np.array(
    [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, -1, 0], [1, 0, -1], [0, 1, -1]], dtype=float
)


def pairwise_oracle(x_bar):
    """All x_i - x_j (i < j) by a direct double loop, in B_u row order."""
    d = len(x_bar)
    out = [x_bar[q] - x_bar[d - 1] for q in range(d - 1)]
    for i in range(d - 1):
        for j in range(i + 1, d - 1):
            out.append(x_bar[i] - x_bar[j])
    return np.array(out)


def test_bu_d4_golden():
    np.testing.assert_array_equal(build_Bu(4), BU4)


def test_bu_d2():
    np.testing.assert_array_equal(build_Bu(2), [[1.0]])


def test_bu_rejects_small():
    with pytest.raises(ValueError):
        build_Bu(1)


@pytest.mark.parametrize("d", range(2, 13))
def test_bu_reproduces_differences(d):
    rng = np.random.default_rng(d)
    x_bar = canonical_coords(rng.normal(size=d))
    np.testing.assert_array_equal(build_Bu(d) @ x_bar[:-1], pairwise_oracle(x_bar))


@pytest.mark.parametrize("d", [3, 5, 9])
def test_every_pair_once(d):
    B = build_Bu(d)
    seen = set()
    for row, (i, j) in zip(B, pair_index(d)):
        plus = np.flatnonzero(row == 1)
        minus = np.flatnonzero(row == -1)
        assert len(plus) == 1 and len(minus) <= 1
        # the origin point is the dropped coordinate
        got = (int(plus[0]), int(minus[0]) if len(minus) else d - 1)
        assert got == (i, j)
        seen.add(got)
    assert seen == set(itertools.combinations(range(d), 2))


def test_partition_tiles_rows():
    for d in range(2, 20):
        assert udgp_partition(d).n == d * (d - 1) // 2
    assert udgp_partition(5).sizes == (4, 3, 2, 1)


def test_figure_example_distances():
    inst = make_udgp_instance([0, 3, 7, 9], seed=0)
    assert sorted(inst.distances.tolist()) == [2, 3, 4, 6, 7, 9]
    np.testing.assert_array_equal(inst.x_star, [9, 7, 3])


def test_identity_permutation_gives_stack():
    part = udgp_partition(4)
    inst = make_udgp_instance([0, 3, 7, 9], Pstar=BlockPermutation.identity(part))
    np.testing.assert_array_equal(inst.distances, BU4 @ [9, 7, 3])


def test_translation_invariance():
    a = make_udgp_instance([0.5, 2.0, -1.0, 4.0], seed=3)
    b = make_udgp_instance([10.5, 12.0, 9.0, 14.0], seed=3)
    np.testing.assert_array_equal(a.distances, b.distances)


def test_multiset_of_differences():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=7)
    inst = make_udgp_instance(pts, seed=5)
    expected = sorted(abs(a - b) for a, b in itertools.combinations(pts, 2))
    np.testing.assert_allclose(sorted(inst.distances), expected, atol=1e-12)


def test_block_local_worked_example_unique():
    # the displayed distances regrouped so that each block shares a known endpoint
    part = udgp_partition(4)
    y = np.array([3.0, 9.0, 7.0, 6.0, 2.0, 4.0])
    consistent = []
    for a in itertools.permutations(range(3)):
        for b in itertools.permutations(range(2)):
            P = BlockPermutation(part, (a, b, (0,)))
            z = apply_permutation(invert(P), y)
            x, *_ = np.linalg.lstsq(BU4, z, rcond=None)
            if np.allclose(BU4 @ x, z, atol=1e-9):
                consistent.append(x)
    assert len(consistent) == 1
    np.testing.assert_allclose(consistent[0], [9, 7, 3])


def test_recover_small_noiseless():
    P = BlockPermutation(udgp_partition(4), ((1, 2, 0), (1, 0), (0,)))
    inst = make_udgp_instance([0, 3, 7, 9], Pstar=P)
    np.testing.assert_array_equal(inst.distances, [3, 9, 7, 6, 2, 4])
    rec = recover_points(inst)
    assert rec.relative_error <= 1e-8
    np.testing.assert_allclose(rec.coords, [9, 7, 3, 0], atol=1e-8)


def test_identity_ordering_single_iteration():
    part = udgp_partition(6)
    inst = make_udgp_instance([0, 1.0, 2.5, 4.5, 7.0, 11.0], Pstar=BlockPermutation.identity(part))
    rec = recover_points(inst)
    assert rec.result.iterations == 1
    assert rec.relative_error <= 1e-10


def test_noiseless_distance_multiset_recovered():
    inst = make_udgp_instance(d=15, variance=5.0, seed=6)
    rec = recover_points(inst)
    sense = inst.to_sense()
    fitted = build_Bu(15) @ rec.result.X_hat[:, 0]
    np.testing.assert_allclose(apply_permutation(invert(rec.result.P_hat), sense.Y)[:, 0], fitted, atol=1e-8)
    np.testing.assert_allclose(np.sort(fitted), np.sort(inst.distances), atol=1e-8)


def test_noise_trend():
    errs = []
    for s2 in (0.0, 0.01, 0.1):
        errs.append(
            np.mean([recover_points(make_udgp_instance(d=20, variance=5.0, sigma2=s2, seed=s)).relative_error for s in range(5)])
        )
    assert errs[0] < errs[1] < errs[2]


def test_resample_counter():
    inst = make_udgp_instance(d=10, variance=1.0, seed=1)
    assert inst.resampled == 0
    assert np.min(np.diff(np.sort(inst.coords))) > 1e-12


def test_bad_lengths():
    from rlocal.udgp import UdgpInstance

    with pytest.raises(ValueError):
        UdgpInstance(4, np.zeros(5), BlockPartition((5,)))
