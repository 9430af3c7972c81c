import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import der_ms_oracle, frame_der, levenshtein_counts
from sidecar_mtl.diarize import to_rttm
from sidecar_mtl.metrics import (DerBreakdown, RTTMParseError, WerBreakdown, der, der_components, edit_distance,
                                 evaluation_report, parse_rttm, permuted_wer, pool_wer)
from sidecar_mtl.timeline import DiarTimeline, activity_from_timeline, timeline_from_activity

tokens = st.lists(st.integers(1, 4), max_size=6)


def test_edit_distance_examples():
    assert edit_distance("a b c", "a b c") == (0, 0, 0)
    assert edit_distance("a b", "a x b") == (0, 1, 0)
    # distance 2; fewest-substitution alignment keeps c, deletes b, inserts x
    s, i, d = edit_distance("a b c d", "a c x d")
    assert s + i + d == 2
    assert (s, i, d) == levenshtein_counts("abcd", "acxd")


@settings(max_examples=200, deadline=None)
@given(tokens, tokens)
def test_edit_distance_matches_exhaustive_search(r, h):
    assert edit_distance(r, h) == levenshtein_counts(r, h)


def test_permuted_wer_examples():
    w, perm = permuted_wer(["a b c", "d e"], ["d e", "a b c"])
    assert w.wer == 0 and perm == (1, 0)
    w, perm = permuted_wer(["a b", "c d"], ["a x", "c d e"])
    assert perm == (0, 1)
    assert (w.substitutions, w.insertions, w.deletions) == (1, 1, 0)
    assert w.wer == 0.5
    w, _ = permuted_wer(["a b c"], [""])
    assert w.deletions == 3 and w.wer == 1.0


def test_permuted_wer_pads_missing_hypotheses():
    w, _ = permuted_wer(["a b", "c"], ["c"])
    assert w.errors == 2 and w.reference_words == 3


@settings(max_examples=60, deadline=None)
@given(st.lists(tokens, min_size=2, max_size=3), st.data())
def test_permuted_wer_invariances(refs, data):
    assert permuted_wer(refs, refs)[0].errors == 0
    hyps = data.draw(st.lists(tokens, min_size=len(refs), max_size=len(refs)))
    order = data.draw(st.permutations(range(len(refs))))
    a, _ = permuted_wer(refs, hyps)
    b, _ = permuted_wer([refs[i] for i in order], [hyps[i] for i in order])
    assert a.errors == b.errors
    oracle = min(sum(sum(edit_distance(refs[s], hyps[p[s]])) for s in range(len(refs)))
                 for p in itertools.permutations(range(len(refs))))
    assert a.errors == oracle


def test_wer_breakdown_pooling():
    a = WerBreakdown(1, 0, 0, 4)
    b = WerBreakdown(0, 2, 1, 6)
    pooled = pool_wer([a, b])
    assert pooled.errors == 4 and pooled.reference_words == 10
    assert pooled.wer == 0.4
    assert WerBreakdown(0, 1, 0, 0).wer == 1.0  # max(1, words) denominator


def _tl(rows_ms):
    return DiarTimeline((s, a / 1000, b / 1000) for s, a, b in rows_ms)


# (reference, hypothesis, collar_ms); intervals in integer milliseconds
DER_CASES = [
    ([("A", 0, 10000)], [("A", 0, 8000)], 250),
    ([("A", 0, 4000), ("B", 4000, 8000)], [("B", 0, 4000), ("A", 4000, 8000)], 250),
    ([("A", 0, 5000)], [("A", 0, 5000), ("B", 6000, 8000)], 250),
    ([("A", 0, 4000), ("B", 4000, 8000)], [("X", 0, 8000)], 250),
    ([("A", 0, 6000), ("B", 3000, 9000)], [("X", 0, 6000)], 250),
    ([("A", 0, 6000), ("B", 3000, 9000)], [("X", 0, 6000)], 0),
    ([("A", 0, 3000), ("B", 2000, 7000)], [("X", 0, 2500), ("Y", 2500, 7000), ("Z", 6000, 7500)], 250),
    ([("A", 1000, 4000), ("A", 6000, 9000), ("B", 3500, 6500)],
     [("P", 1100, 3900), ("Q", 3400, 6700), ("P", 6100, 9300)], 250),
    ([("A", 0, 2000), ("B", 500, 2500), ("C", 1500, 4000)], [("X", 0, 2000), ("Y", 500, 4000)], 100),
    ([("A", 0, 3000)], [("A", 0, 3000), ("B", 0, 3000)], 0),
]


@pytest.mark.parametrize("ref,hyp,collar_ms", DER_CASES)
def test_der_matches_interval_oracle(ref, hyp, collar_ms):
    got = der(_tl(ref), _tl(hyp), collar_ms / 1000)
    miss, fa, conf, scored = der_ms_oracle(ref, hyp, collar_ms)
    assert got.miss_seconds == pytest.approx(miss, abs=1e-6)
    assert got.falarm_seconds == pytest.approx(fa, abs=1e-6)
    assert got.confusion_seconds == pytest.approx(conf, abs=1e-6)
    assert got.scored_speech_seconds == pytest.approx(scored, abs=1e-6)
    assert got.der == pytest.approx(got.mi + got.fa + got.cf, abs=1e-15)


def test_der_collar_example():
    got = der(_tl([("A", 0, 10000)]), _tl([("A", 0, 8000)]), 0.25)
    assert got.scored_speech_seconds == pytest.approx(9.5)
    assert got.miss_seconds == pytest.approx(1.75)
    assert got.der == pytest.approx(0.1842105, abs=1e-6)
    assert got.falarm_seconds == 0 and got.confusion_seconds == 0


def test_der_identity_and_swap():
    ref = _tl([("A", 0, 4000), ("B", 4000, 8000)])
    assert der(ref, ref).der == 0
    assert der(ref, _tl([("B", 0, 4000), ("A", 4000, 8000)])).der == 0


def test_der_undefined_without_reference_speech():
    with pytest.raises(ValueError):
        der(DiarTimeline(), _tl([("A", 0, 1000)]))
    with pytest.raises(ValueError):
        der(_tl([("A", 0, 400)]), DiarTimeline(), collar_seconds=0.25)


def test_der_breakdown_ratio_errors():
    with pytest.raises(ValueError):
        DerBreakdown().der
    total = DerBreakdown(1.0, 0.5, 0.0, 10.0) + DerBreakdown(0.0, 0.0, 1.0, 10.0)
    assert total.der == pytest.approx(0.125)


def _random_frame_timelines(rng, S, n_frames):
    ref = (rng.random((S, n_frames)) < 0.4).astype(int)
    hyp = ref.copy()
    flip = rng.random(hyp.shape) < 0.15
    hyp[flip] = 1 - hyp[flip]
    return ref, hyp[rng.permutation(S)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 3))
def test_der_collar_zero_matches_frame_count(seed, S):
    rng = np.random.default_rng(seed)
    ref_a, hyp_a = _random_frame_timelines(rng, S, 60)
    if ref_a.sum() == 0:
        return
    ref = timeline_from_activity(ref_a, 20)
    hyp = timeline_from_activity(hyp_a, 20, [f"h{s}" for s in range(S)])
    got = der(ref, hyp, 0.0)
    err, scored = frame_der(ref_a.astype(bool), hyp_a.astype(bool), 0.02)
    assert got.scored_speech_seconds == pytest.approx(scored, abs=1e-9)
    assert got.miss_seconds + got.falarm_seconds + got.confusion_seconds == pytest.approx(err, abs=0.02)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_der_relabel_symmetry_and_collar_monotonicity(seed):
    rng = np.random.default_rng(seed)
    ref_a, hyp_a = _random_frame_timelines(rng, 2, 80)
    ref = timeline_from_activity(ref_a, 20)
    hyp = timeline_from_activity(hyp_a, 20, ["x", "y"])
    if ref.total_speech() == 0:
        return
    base = der_components(ref, hyp, 0.0)
    relabeled = der_components(ref, hyp.relabel({"x": "q", "y": "p"}), 0.0)
    for field in ("miss_seconds", "falarm_seconds", "confusion_seconds", "scored_speech_seconds"):
        assert getattr(base, field) == pytest.approx(getattr(relabeled, field), abs=1e-12)
    prev = np.inf
    for collar in (0.0, 0.01, 0.05, 0.25):
        cur = der_components(ref, hyp, collar).scored_speech_seconds
        assert cur <= prev + 1e-12
        prev = cur


interval_sets = st.lists(
    st.tuples(st.sampled_from(["spk0", "spk1", "spk2"]), st.integers(0, 3000), st.integers(1, 400)),
    max_size=8)


@settings(max_examples=100, deadline=None)
@given(interval_sets)
def test_rttm_round_trip(rows):
    tl = DiarTimeline((s, a / 100, (a + d) / 100) for s, a, d in rows)
    back = parse_rttm(to_rttm(tl, "rec"))
    assert back.close_to(tl, 1e-6)


def test_rttm_format_and_errors():
    assert to_rttm(DiarTimeline([("spk0", 0.0, 0.1)]), "rec") == \
        "SPEAKER rec 1 0.00 0.10 <NA> <NA> spk0 <NA> <NA>\n"
    assert to_rttm(DiarTimeline(), "rec") == ""
    assert parse_rttm("") == DiarTimeline()
    with pytest.raises(RTTMParseError, match="line 2"):
        parse_rttm("SPEAKER r 1 0.00 1.00 <NA> <NA> a <NA> <NA>\nSPEAKER r 1 x 1.00 <NA> <NA> a <NA> <NA>\n")


def test_rttm_lines_sorted_by_onset_then_speaker():
    tl = DiarTimeline([("b", 1.0, 2.0), ("a", 1.0, 1.5), ("c", 0.5, 0.7)])
    lines = to_rttm(tl, "r").splitlines()
    assert [ln.split()[7] for ln in lines] == ["c", "a", "b"]


def test_evaluation_report_schema():
    rep = evaluation_report(WerBreakdown(1, 0, 0, 4), DerBreakdown(1.0, 0.0, 0.0, 4.0), [{"id": "x"}])
    assert set(rep) == {"wer", "der", "per_utterance"}
    assert {"mi", "fa", "cf", "der"} <= set(rep["der"])
    assert rep["wer"]["wer"] == 0.25


def test_timeline_examples():
    act = np.zeros((1, 10), int)
    act[0, :5] = 1
    assert timeline_from_activity(act, 20).intervals[0][1:] == pytest.approx((0.0, 0.1))
    tl = timeline_from_activity(np.array([[1, 0, 1]]), 20)
    assert [round(iv.duration, 9) for iv in tl] == [0.02, 0.02]
    assert len(timeline_from_activity(np.zeros((2, 5)), 20)) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_timeline_activity_round_trip(seed):
    rng = np.random.default_rng(seed)
    act = (rng.random((2, 50)) < 0.5).astype(np.int64)
    tl = timeline_from_activity(act, 20)
    back = activity_from_timeline(tl, 50, 20, speakers=["spk0", "spk1"])
    assert np.array_equal(back, act)
    assert timeline_from_activity(back, 20) == tl


def test_timeline_merges_and_validates():
    tl = DiarTimeline([("a", 0, 1), ("a", 0.5, 2), ("a", 3, 4)])
    assert [(iv.onset, iv.offset) for iv in tl] == [(0, 2), (3, 4)]
    with pytest.raises(ValueError):
        DiarTimeline([("a", 1, 1)])
