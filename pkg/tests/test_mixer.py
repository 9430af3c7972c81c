import json

import numpy as np
import pytest

from sidecar_mtl.diarize import SegmentPlan
from sidecar_mtl.mixer import (SpeakerProfile, TurnModel, gen_conversation, gen_utterance, make_corpus,
                               make_speakers, mix_delayed, mix_left_aligned, overlap_fraction, read_manifest,
                               write_manifest)
from sidecar_mtl.timeline import DiarTimeline, activity_from_timeline


@pytest.fixture(scope="module")
def pool():
    return make_speakers(12)


def test_speaker_pool_fundamentals_distinct(pool):
    f0 = sorted(p.f0 for p in pool)
    assert len({p.speaker_id for p in pool}) == 12
    assert min(np.diff(f0)) >= 10


def test_gen_utterance_determinism_and_duration(pool):
    a = gen_utterance(pool[0], 5, seed=3)
    b = gen_utterance(pool[0], 5, seed=3)
    assert np.array_equal(a.waveform, b.waveform) and a.transcript == b.transcript
    assert all(1 <= t <= 6 for t in a.transcript)
    fixed = SpeakerProfile("x", 120.0, frames_per_token=(10, 10))
    u = gen_utterance(fixed, 5, seed=0)
    assert u.duration == 1.0 and u.n_frames == 50
    assert u.boundaries == sorted(u.boundaries)
    other = gen_utterance(pool[1], 5, seed=3, transcript=a.transcript)
    assert other.transcript == a.transcript
    assert not np.array_equal(other.waveform[:len(a.waveform)], a.waveform[:len(other.waveform)])
    with pytest.raises(ValueError):
        gen_utterance(pool[0], 0, seed=0)


def test_left_aligned_example():
    p1 = SpeakerProfile("s1", 100.0, frames_per_token=(10, 10))
    p2 = SpeakerProfile("s2", 250.0, frames_per_token=(5, 5), register=1)
    u1, u2 = gen_utterance(p1, 5, 0), gen_utterance(p2, 5, 1)
    m = mix_left_aligned([u1, u2])
    assert len(m.waveform) / m.sample_rate == 1.0
    assert m.onsets == [0.0, 0.0]
    assert np.flatnonzero(m.activity[1]).tolist() == list(range(25))
    assert m.activity.sum(axis=1).tolist() == [50, 25]
    np.testing.assert_array_equal(m.waveform, m.sources[0] + m.sources[1])
    with pytest.raises(ValueError):
        mix_left_aligned([u1, gen_utterance(p1, 3, 2)])


def test_left_aligned_equal_length_full_overlap():
    p1 = SpeakerProfile("s1", 100.0, frames_per_token=(5, 5))
    p2 = SpeakerProfile("s2", 250.0, frames_per_token=(5, 5), register=1)
    m = mix_left_aligned([gen_utterance(p1, 4, 0), gen_utterance(p2, 4, 1)])
    assert overlap_fraction(m.timeline()) == 1.0


def test_delayed_mixture(pool):
    utts = [gen_utterance(pool[0], 6, 0), gen_utterance(pool[1], 6, 1), gen_utterance(pool[2], 4, 2)]
    a, b = mix_delayed(utts, seed=5), mix_delayed(utts, seed=5)
    assert a.onsets == b.onsets and a.onsets[0] == 0.0
    for i in range(1, 3):
        assert a.onsets[i] <= max(a.onsets[j] + a.durations[j] for j in range(i)) + 1e-12
    assert len(a.waveform) == max(int(round((o + d) * 8000)) for o, d in zip(a.onsets, a.durations))
    np.testing.assert_array_equal(a.waveform, a.sources[0] + a.sources[1] + a.sources[2])
    for s in range(3):
        first = np.flatnonzero(a.activity[s])[0]
        assert first == int(np.floor(a.onsets[s] / 0.02 + 1e-9))


def test_onset_to_frame_arithmetic():
    act = activity_from_timeline(DiarTimeline([("b", 0.3, 0.8)]), 50, 20)
    assert np.flatnonzero(act[0])[0] == 15


def test_activity_matches_quantised_timeline():
    for m in make_corpus("delayed", 5, seed=2):
        q = activity_from_timeline(m.timeline(), m.n_frames, m.frame_ms, m.speaker_ids)
        np.testing.assert_array_equal(q, m.activity)
        for s, src in enumerate(m.sources):
            frames = src[: m.n_frames * 160].reshape(m.n_frames, 160)
            nonsilent = np.abs(frames).max(axis=1) > 0
            np.testing.assert_array_equal(nonsilent, m.activity[s].astype(bool))


@pytest.fixture(scope="module")
def conversations(pool):
    return [gen_conversation([pool[0], pool[1]], 73.0, TurnModel(), seed) for seed in range(20)]


def test_conversation_shape(conversations, pool):
    m, tl = conversations[0]
    again, tl2 = gen_conversation([pool[0], pool[1]], 73.0, TurnModel(), 0)
    assert np.array_equal(m.waveform, again.waveform) and tl == tl2
    assert len(m.waveform) / 8000 == pytest.approx(73.0, abs=0.02)
    for spk in tl.speakers():
        ivs = tl.for_speaker(spk)
        assert all(a.offset < b.onset for a, b in zip(ivs, ivs[1:]))
    assert m.timeline() == tl
    np.testing.assert_array_equal(m.waveform, m.sources[0] + m.sources[1])


def _analytic_overlap_fraction(tm: TurnModel):
    # overlap per boundary: p * E[min(U * max_overlap, turn)], turn ~ Exp(mean)
    u = np.linspace(0, tm.max_overlap, 20001)
    mean_min = np.trapezoid(tm.mean_turn * (1 - np.exp(-u / tm.mean_turn)), u) / tm.max_overlap
    ov = tm.overlap_prob * mean_min
    return ov / (tm.mean_turn - ov)


def test_conversation_overlap_matches_turn_model(conversations):
    fracs = [overlap_fraction(tl) for _, tl in conversations]
    expected = _analytic_overlap_fraction(TurnModel())
    assert expected == pytest.approx(0.031, abs=0.001)
    assert abs(np.mean(fracs) - expected) < 0.01
    assert all(0 <= f < 0.2 for f in fracs)


def test_manifest_round_trip(tmp_path):
    mixes = make_corpus("delayed", 3, n_speakers=3, seed=9) + make_corpus("conversation", 1, seed=1,
                                                                          conversation_seconds=20.0)
    path = write_manifest(mixes, tmp_path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert len(list((tmp_path / "audio").iterdir())) == 4 and len(list((tmp_path / "rttm").iterdir())) == 4
    assert len(json.loads(lines[0])["speakers"]) == 3
    back = read_manifest(path)
    for a, b in zip(mixes, back):
        assert a.mixture_id == b.mixture_id
        assert a.waveform.tobytes() == b.waveform.tobytes()
        assert a.transcripts == b.transcripts and a.onsets == b.onsets and a.speaker_ids == b.speaker_ids
        assert b.timeline().close_to(a.timeline(), 0.006)
        np.testing.assert_array_equal(a.activity, b.activity)


def test_manifest_empty_and_deterministic(tmp_path):
    assert write_manifest([], tmp_path / "e").read_text() == ""
    a = write_manifest(make_corpus("left-aligned", 2, seed=4), tmp_path / "a")
    b = write_manifest(make_corpus("left-aligned", 2, seed=4), tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()
    for sub in ("audio", "rttm"):
        for f in sorted((tmp_path / "a" / sub).iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / sub / f.name).read_bytes()


def test_corpus_styles_and_errors():
    with pytest.raises(ValueError):
        make_corpus("bogus", 1)
    single = make_corpus("single", 2)
    assert all(m.n_speakers == 1 for m in single)
    mixes = make_corpus("left-aligned", 4, seed=1)
    for m in mixes:
        assert m.n_speakers == 2 and m.onsets == [0.0, 0.0]
    assert SegmentPlan().hop_frames == 750
