"""Deterministic synthetic speech: tones-as-letters utterances and mixtures.

Each speaker owns a frequency register; a letter is a tone on that
register's grid (slightly detuned per speaker) over a low harmonic buzz at
the speaker's fundamental.  Every token has short fades so repeated letters
stay separable.  Mixtures come in two styles: left-aligned (all sources start
at 0) and delayed (later sources start at a uniformly drawn offset).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .backbone import DEFAULT_VOCAB
from .timeline import DiarTimeline, activity_from_timeline

SAMPLE_RATE = 8000
FRAME_MS = 20

# letter grids per register (Hz); index = token - 1.  The gap between the
# grids keeps token tones apart; high-register harmonics still land in the
# low grid, so mixtures overlap partially in frequency.
REGISTER_GRIDS = (
    (400.0, 600.0, 800.0, 1000.0, 1200.0, 1400.0),
    (2600.0, 2800.0, 3000.0, 3200.0, 3400.0, 3600.0),
)
REGISTER_F0 = ((85.0, 175.0), (185.0, 305.0))


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    f0: float
    harmonic_weights: tuple = (0.3, 0.15, 0.05)
    frames_per_token: tuple = (4, 6)
    register: int = 0
    gain: float = 1.0

    @property
    def detune(self) -> float:
        lo, hi = REGISTER_F0[self.register % len(REGISTER_F0)]
        return 1.0 + 0.02 * (self.f0 - (lo + hi) / 2) / ((hi - lo) / 2)


@dataclass
class Utterance:
    waveform: np.ndarray
    transcript: list[int]
    speaker_id: str
    # frame index where each token starts, plus the end frame
    boundaries: list[int]
    sample_rate: int = SAMPLE_RATE
    frame_ms: int = FRAME_MS

    @property
    def duration(self) -> float:
        return len(self.waveform) / self.sample_rate

    @property
    def n_frames(self) -> int:
        return self.boundaries[-1]


@dataclass
class Mixture:
    waveform: np.ndarray
    transcripts: list[list[int]]
    speaker_ids: list[str]
    onsets: list[float]
    activity: np.ndarray
    sources: list[np.ndarray] = field(default_factory=list, repr=False)
    durations: list[float] = field(default_factory=list)
    sample_rate: int = SAMPLE_RATE
    frame_ms: int = FRAME_MS
    mixture_id: str = ""
    # exact reference intervals when a speaker has several turns
    reference: DiarTimeline | None = field(default=None, repr=False)

    @property
    def n_speakers(self) -> int:
        return len(self.speaker_ids)

    @property
    def n_frames(self) -> int:
        return self.activity.shape[1]

    def timeline(self) -> DiarTimeline:
        """Exact (unquantised) reference intervals."""
        if self.reference is not None:
            return self.reference
        return DiarTimeline((spk, on, on + dur) for spk, on, dur in zip(self.speaker_ids, self.onsets, self.durations))


def make_speakers(n: int, seed: int = 0, n_registers: int = 2,
                  frames_per_token: tuple = (4, 6)) -> list[SpeakerProfile]:
    """Speaker pool alternating registers, fundamentals at least 10 Hz apart."""
    rng = np.random.default_rng(seed)
    out = []
    used: list[float] = []
    for i in range(n):
        reg = i % n_registers
        lo, hi = REGISTER_F0[reg % len(REGISTER_F0)]
        for _ in range(1000):
            f0 = float(np.round(rng.uniform(lo, hi), 1))
            if all(abs(f0 - u) >= 10 for u in used):
                break
        else:
            raise ValueError(f"cannot place {n} speakers with distinct fundamentals")
        used.append(f0)
        weights = tuple(float(w) for w in np.round(rng.uniform(0.05, 0.35, 3), 3))
        out.append(SpeakerProfile(f"spk{i:03d}", f0, weights, tuple(frames_per_token), reg))
    return out


def token_frequency(token: int, profile: SpeakerProfile) -> float:
    grid = REGISTER_GRIDS[profile.register % len(REGISTER_GRIDS)]
    return grid[(token - 1) % len(grid)] * profile.detune


def _render_token(token: int, n_samples: int, profile: SpeakerProfile, rng: np.random.Generator,
                  sample_rate: int) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    f = token_frequency(token, profile)
    sig = np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    for h, w in enumerate(profile.harmonic_weights, start=1):
        if h * profile.f0 < sample_rate / 2:
            sig += w * np.sin(2 * np.pi * h * profile.f0 * t + rng.uniform(0, 2 * np.pi))
    fade = min(n_samples // 4, int(0.01 * sample_rate))
    if fade > 0:
        ramp = np.sin(np.linspace(0, np.pi / 2, fade, endpoint=False)) ** 2
        sig[:fade] *= ramp
        sig[n_samples - fade:] *= ramp[::-1]
    return profile.gain * sig


def gen_utterance(profile: SpeakerProfile, transcript_length: int, seed: int,
                  vocab_size: int = len(DEFAULT_VOCAB), transcript: Sequence[int] | None = None,
                  sample_rate: int = SAMPLE_RATE, frame_ms: int = FRAME_MS) -> Utterance:
    """Render a random (or given) letter sequence in ``profile``'s voice."""
    if transcript_length < 1:
        raise ValueError("transcript_length must be >= 1")
    rng = np.random.default_rng(seed)
    if transcript is None:
        transcript = [int(v) for v in rng.integers(1, vocab_size, size=transcript_length)]
    else:
        transcript = [int(v) for v in transcript]
    hop = sample_rate * frame_ms // 1000
    lo, hi = profile.frames_per_token
    pieces, bounds = [], [0]
    for tok in transcript:
        nf = int(rng.integers(lo, hi + 1))
        pieces.append(_render_token(tok, nf * hop, profile, rng, sample_rate))
        bounds.append(bounds[-1] + nf)
    return Utterance(np.concatenate(pieces), list(transcript), profile.speaker_id, bounds, sample_rate, frame_ms)


def _assemble(utterances: Sequence[Utterance], onsets_samples: Sequence[int], n_total: int | None = None) -> Mixture:
    ids = [u.speaker_id for u in utterances]
    if len(set(ids)) != len(ids):
        raise ValueError(f"mixture needs distinct speakers, got {ids}")
    sr, fm = utterances[0].sample_rate, utterances[0].frame_ms
    hop = sr * fm // 1000
    end = max(o + len(u.waveform) for u, o in zip(utterances, onsets_samples))
    n_total = end if n_total is None else n_total
    wav = np.zeros(n_total)
    sources = []
    for u, o in zip(utterances, onsets_samples):
        src = np.zeros(n_total)
        src[o:o + len(u.waveform)] = u.waveform
        sources.append(src)
        wav = wav + src
    onsets = [o / sr for o in onsets_samples]
    durs = [len(u.waveform) / sr for u in utterances]
    # ends from sample counts, so they match the RTTM-parsed values exactly
    tl = DiarTimeline((spk, o / sr, (o + len(u.waveform)) / sr)
                      for spk, o, u in zip(ids, onsets_samples, utterances))
    activity = activity_from_timeline(tl, n_total // hop, fm, speakers=ids)
    return Mixture(wav, [list(u.transcript) for u in utterances], ids, onsets, activity, sources, durs, sr, fm,
                   reference=tl)


def mix_left_aligned(utterances: Sequence[Utterance]) -> Mixture:
    """All sources start at 0; the shorter ones are fully overlapped."""
    if len(utterances) < 2:
        raise ValueError("need at least two utterances")
    return _assemble(utterances, [0] * len(utterances))


def mix_delayed(utterances: Sequence[Utterance], seed: int) -> Mixture:
    """Source i>0 starts uniformly within the length of the mixture so far.

    Onsets are drawn on the frame grid so references stay frame-aligned.
    """
    if len(utterances) < 2:
        raise ValueError("need at least two utterances")
    rng = np.random.default_rng(seed)
    hop = utterances[0].sample_rate * utterances[0].frame_ms // 1000
    onsets = [0]
    length = len(utterances[0].waveform)
    for u in utterances[1:]:
        o = hop * int(rng.integers(0, length // hop + 1))
        onsets.append(o)
        length = max(length, o + len(u.waveform))
    return _assemble(utterances, onsets)


def single_talker(utterance: Utterance) -> Mixture:
    return _assemble([utterance], [0])


@dataclass(frozen=True)
class TurnModel:
    mean_turn: float = 3.0
    overlap_prob: float = 0.2
    max_overlap: float = 1.0


def gen_conversation(profiles: Sequence[SpeakerProfile], total_seconds: float, turn_model: TurnModel = TurnModel(),
                     seed: int = 0, vocab_size: int = len(DEFAULT_VOCAB)) -> tuple[Mixture, DiarTimeline]:
    """Two-party alternating conversation of about ``total_seconds``.

    Turn lengths are exponential; each turn boundary overlaps the next turn
    with probability ``overlap_prob`` by U(0, max_overlap) seconds (capped at
    the turn length), otherwise the next turn starts right after.  All
    boundaries fall on the frame grid.
    """
    if len(profiles) != 2:
        raise ValueError("a conversation needs exactly two speaker profiles")
    rng = np.random.default_rng(seed)
    sr = SAMPLE_RATE
    hop = sr * FRAME_MS // 1000
    target = int(round(total_seconds * sr))
    tokens_frames = np.mean(profiles[0].frames_per_token)
    spk = int(rng.integers(0, 2))
    pieces: list[list[tuple[int, np.ndarray]]] = [[], []]
    transcripts: list[list[int]] = [[], []]
    intervals = []
    t = 0
    while t < target:
        dur = rng.exponential(turn_model.mean_turn)
        n_tok = max(1, int(round(dur * 1000 / FRAME_MS / tokens_frames)))
        utt = gen_utterance(profiles[spk], n_tok, int(rng.integers(2**31)), vocab_size)
        wav = utt.waveform[: max(0, (target - t) // hop * hop)]
        if len(wav) < hop:
            break
        pieces[spk].append((t, wav))
        transcripts[spk].extend(utt.transcript)
        intervals.append((profiles[spk].speaker_id, t / sr, (t + len(wav)) / sr))
        end = t + len(wav)
        if rng.random() < turn_model.overlap_prob:
            ov = hop * int(rng.uniform(0, turn_model.max_overlap) * 1000 / FRAME_MS)
            ov = min(ov, len(wav) - hop)
            t = end - ov
        else:
            t = end
        spk = 1 - spk
    n_total = max(e for e in (int(round(iv[2] * sr)) for iv in intervals))
    sources = []
    for rows in pieces:
        src = np.zeros(n_total)
        for start, wav in rows:
            src[start:start + len(wav)] += wav
        sources.append(src)
    wav = sources[0] + sources[1]
    ids = [p.speaker_id for p in profiles]
    timeline = DiarTimeline(intervals)
    activity = activity_from_timeline(timeline, n_total // hop, FRAME_MS, speakers=ids)
    first_onsets = [min((iv.onset for iv in timeline.for_speaker(s)), default=0.0) for s in ids]
    durs = [sum(iv.duration for iv in timeline.for_speaker(s)) for s in ids]
    mix = Mixture(wav, transcripts, ids, first_onsets, activity, sources, durs, reference=timeline)
    return mix, timeline


def overlap_fraction(timeline: DiarTimeline, total_seconds: float | None = None, resolution: float = 0.001) -> float:
    """Fraction of speech time (union) where two or more speakers talk."""
    end = total_seconds if total_seconds is not None else max((iv.offset for iv in timeline), default=0.0)
    n = int(np.ceil(end / resolution))
    count = np.zeros(n + 1, dtype=np.int64)
    for iv in timeline:
        count[int(round(iv.onset / resolution)):int(round(iv.offset / resolution))] += 1
    speech = np.count_nonzero(count)
    return float(np.count_nonzero(count >= 2) / speech) if speech else 0.0


# --------------------------------------------------------------------------
# corpora


def _pick_speakers(pool: Sequence[SpeakerProfile], n: int, rng: np.random.Generator) -> list[SpeakerProfile]:
    """Draw ``n`` speakers from distinct registers when the pool allows it."""
    by_reg: dict[int, list[SpeakerProfile]] = {}
    for p in pool:
        by_reg.setdefault(p.register, []).append(p)
    regs = sorted(by_reg)
    if len(regs) >= n:
        chosen_regs = rng.permutation(regs)[:n]
        return [by_reg[r][int(rng.integers(len(by_reg[r])))] for r in chosen_regs]
    idx = rng.choice(len(pool), size=n, replace=False)
    return [pool[i] for i in idx]


def make_corpus(style: str, count: int, n_speakers: int = 2, seed: int = 0, pool_size: int = 12,
                speaker_seed: int = 0,
                length_range: tuple = (6, 14), conversation_seconds: float = 73.0,
                vocab_size: int = len(DEFAULT_VOCAB)) -> list[Mixture]:
    """Corpus of ``count`` items in one of: single, left-aligned, delayed, conversation.

    The speaker pool depends only on ``speaker_seed`` so train and held-out
    corpora share voices; ``seed`` drives everything else.
    """
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; expected one of {STYLES}")
    rng = np.random.default_rng(seed)
    pool = make_speakers(pool_size, seed=speaker_seed)
    out = []
    for i in range(count):
        item_seed = int(rng.integers(2**31))
        irng = np.random.default_rng(item_seed)
        if style == "conversation":
            profs = _pick_speakers(pool, 2, irng)
            mix, _ = gen_conversation(profs, conversation_seconds, TurnModel(), int(irng.integers(2**31)), vocab_size)
        else:
            k = 1 if style == "single" else n_speakers
            profs = _pick_speakers(pool, k, irng)
            utts = [gen_utterance(p, int(irng.integers(length_range[0], length_range[1] + 1)),
                                  int(irng.integers(2**31)), vocab_size) for p in profs]
            if style == "single":
                mix = single_talker(utts[0])
            elif style == "left-aligned":
                mix = mix_left_aligned(utts)
            else:
                mix = mix_delayed(utts, int(irng.integers(2**31)))
        mix.mixture_id = f"{style}-{seed}-{i:05d}"
        out.append(mix)
    return out


STYLES = ("single", "left-aligned", "delayed", "conversation")


# --------------------------------------------------------------------------
# manifest I/O


def _transcript_text(tokens: Sequence[int], vocab: Sequence[str]) -> str:
    return " ".join(vocab[t] for t in tokens)


def write_manifest(mixtures: Sequence[Mixture], directory, vocab: Sequence[str] = DEFAULT_VOCAB) -> Path:
    """Write ``manifest.jsonl`` plus one SDTN audio blob and one RTTM per item."""
    from .diarize import to_rttm

    directory = Path(directory)
    try:
        (directory / "audio").mkdir(parents=True, exist_ok=True)
        (directory / "rttm").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {directory}: {exc}") from exc
    manifest = directory / "manifest.jsonl"
    with open(manifest, "w") as fh:
        for i, mix in enumerate(mixtures):
            mid = mix.mixture_id or f"mix{i:05d}"
            audio = Path("audio") / f"{mid}.sdtn"
            rttm = Path("rttm") / f"{mid}.rttm"
            try:
                T.save(directory / audio, mix.waveform)
                (directory / rttm).write_text(to_rttm(mix.timeline(), mid))
            except OSError as exc:
                raise OSError(f"failed writing {directory / audio}: {exc}") from exc
            row = {
                "id": mid,
                "audio_path": str(audio),
                "speakers": [{"id": spk, "transcript": _transcript_text(tr, vocab), "onset": on,
                              "duration": dur}
                             for spk, tr, on, dur in zip(mix.speaker_ids, mix.transcripts, mix.onsets, mix.durations)],
                "rttm_path": str(rttm),
                "sample_rate": mix.sample_rate,
                "frame_ms": mix.frame_ms,
            }
            fh.write(json.dumps(row) + "\n")
    return manifest


def read_manifest(path, vocab: Sequence[str] = DEFAULT_VOCAB) -> list[Mixture]:
    """Inverse of :func:`write_manifest` (sources are not stored, so left empty)."""
    from .metrics import parse_rttm

    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    root = path.parent
    index = {sym: i for i, sym in enumerate(vocab)}
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            wav = T.load(root / row["audio_path"])
            spks = row["speakers"]
            ids = [s["id"] for s in spks]
            try:
                trs = [[index[sym] for sym in s["transcript"].split()] for s in spks]
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: unknown token {exc}") from None
            sr, fm = row.get("sample_rate", SAMPLE_RATE), row.get("frame_ms", FRAME_MS)
            tl = parse_rttm((root / row["rttm_path"]).read_text())
            n_frames = len(wav) // (sr * fm // 1000)
            act = activity_from_timeline(tl, n_frames, fm, speakers=ids)
            out.append(Mixture(wav, trs, ids, [s["onset"] for s in spks], act, [],
                               [s.get("duration", 0.0) for s in spks], sr, fm, row["id"], tl))
    return out
