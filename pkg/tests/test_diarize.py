import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sidecar_mtl.diarize import (SegmentActivity, SegmentPlan, activity_to_decisions, align_permutation,
                                 plan_segments, stitch)


def test_plan_examples():
    assert plan_segments(3000) == [(0, 1500), (750, 2250), (1500, 3000)]
    assert plan_segments(1500) == [(0, 1500)]
    assert plan_segments(100) == [(0, 100)]
    assert plan_segments(1550) == [(0, 1500), (750, 1550)]
    with pytest.raises(ValueError):
        plan_segments(0)
    with pytest.raises(ValueError):
        SegmentPlan(30, 30)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20_000))
def test_plan_covers_every_frame(total):
    segs = plan_segments(total)
    assert segs[0][0] == 0 and segs[-1][1] == total
    cover = np.zeros(total, int)
    for a, b in segs:
        cover[a:b] += 1
    assert cover.min() >= 1 and cover.max() <= 2


def test_align_examples():
    assert align_permutation([[1, 1], [0, 0]], [[0, 0], [1, 1]]) == (1, 0)
    # squared distances: identity 0.02, swap 3.62
    assert align_permutation([[1, 0], [0, 1]], [[0.9, 0.1], [0, 1]]) == (0, 1)
    assert align_permutation([[1, 1], [1, 1]], [[1, 1], [1, 1]]) == (0, 1)
    with pytest.raises(ValueError):
        align_permutation(np.zeros((2, 3)), np.zeros((2, 4)))


def test_decisions_are_strict():
    D = np.array([[0.5, 0.51, 0.49, 1.0]])
    np.testing.assert_array_equal(activity_to_decisions(D), [[0, 1, 0, 1]])
    assert activity_to_decisions(np.full((2, 5), 0.5)).sum() == 0


def _segments_from(D, plan, perms=None):
    out = []
    for i, (a, b) in enumerate(plan_segments(D.shape[1], plan)):
        seg = D[:, a:b]
        if perms is not None:
            seg = seg[list(perms[i])]
        out.append(SegmentActivity(seg.copy(), a))
    return out


def test_stitch_single_segment_identity():
    D = np.random.default_rng(0).random((2, 40))
    np.testing.assert_array_equal(stitch([SegmentActivity(D, 0)]), D)


def test_stitch_recovers_swapped_copy():
    plan = SegmentPlan(0.6, 0.3)  # 30 frames, hop 15
    rng = np.random.default_rng(1)
    D = rng.random((2, 45))
    segs = _segments_from(D, plan, perms=[(0, 1), (1, 0)])
    out, perms = stitch(segs, return_permutations=True)
    assert perms == [(0, 1), (1, 0)]
    np.testing.assert_array_equal(out[:, 15:30], D[:, 15:30])
    np.testing.assert_allclose(out, D, atol=1e-15)


def test_stitch_errors():
    with pytest.raises(ValueError):
        stitch([])
    with pytest.raises(ValueError):
        stitch([SegmentActivity(np.zeros((2, 5)), 3)])
    with pytest.raises(ValueError):
        stitch([SegmentActivity(np.zeros((2, 5)), 0), SegmentActivity(np.zeros((2, 5)), 7)])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(31, 120), st.permutations([0, 1, 2]))
def test_stitch_relabel_equivariance_and_coverage(seed, total, sigma):
    plan = SegmentPlan(0.6, 0.3)
    rng = np.random.default_rng(seed)
    segs = [SegmentActivity(rng.random((3, b - a)), a) for a, b in plan_segments(total, plan)]
    out = stitch(segs)
    assert out.shape == (3, total)
    relabeled = stitch([SegmentActivity(s.D[list(sigma)], s.start_frame) for s in segs])
    np.testing.assert_allclose(relabeled, out[list(sigma)], atol=1e-12)


def test_stitch_chaining_is_associative():
    plan = SegmentPlan(0.6, 0.3)
    rng = np.random.default_rng(7)
    D = rng.random((2, 60))
    segs = _segments_from(D, plan, perms=[(0, 1), (1, 0), (1, 0)])[:3]  # frames [0, 60)
    full = stitch(segs)
    # stitch (2, 3) first, then attach it after segment 1
    tail = stitch([SegmentActivity(s.D, s.start_frame - segs[1].start_frame) for s in segs[1:]])
    joined = stitch([segs[0], SegmentActivity(tail, segs[1].start_frame)])
    np.testing.assert_allclose(full, joined, atol=1e-12)
