"""Permutation-minimised WER and collar-based DER with MI/FA/CF breakdown."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .timeline import DiarTimeline


class RTTMParseError(ValueError):
    pass


# --------------------------------------------------------------------------
# WER


def _tokens(x) -> list:
    return x.split() if isinstance(x, str) else list(x)


def edit_distance(ref, hyp) -> tuple[int, int, int]:
    """(substitutions, insertions, deletions) of a minimal unit-cost alignment.

    Among minimal alignments the one with fewest substitutions is reported.
    Strings are split on whitespace; other sequences are compared item-wise.
    """
    r, h = _tokens(ref), _tokens(hyp)
    n, m = len(r), len(h)
    # cost[i][j] = (edits, subs, ins, dels) for r[:i] vs h[:j]
    cost = [[(0, 0, 0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = (i, 0, 0, i)
    for j in range(1, m + 1):
        cost[0][j] = (j, 0, j, 0)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            e, s, ins, d = cost[i - 1][j - 1]
            if r[i - 1] == h[j - 1]:
                best = (e, s, ins, d)
            else:
                best = (e + 1, s + 1, ins, d)
            e, s, ins, d = cost[i - 1][j]
            cand = (e + 1, s, ins, d + 1)
            if cand[:2] < best[:2]:
                best = cand
            e, s, ins, d = cost[i][j - 1]
            cand = (e + 1, s, ins + 1, d)
            if cand[:2] < best[:2]:
                best = cand
            cost[i][j] = best
    _, s, ins, d = cost[n][m]
    return s, ins, d


@dataclass
class WerBreakdown:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    reference_words: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        return self.errors / max(1, self.reference_words)

    def __add__(self, other: "WerBreakdown") -> "WerBreakdown":
        return WerBreakdown(self.substitutions + other.substitutions, self.insertions + other.insertions,
                            self.deletions + other.deletions, self.reference_words + other.reference_words)

    def to_dict(self) -> dict:
        return {**asdict(self), "wer": self.wer}


def permuted_wer(refs: Sequence, hyps: Sequence) -> tuple[WerBreakdown, tuple[int, ...]]:
    """Best hypothesis-to-reference assignment by total errors.

    Returns the pooled breakdown and ``perm`` with ``perm[s]`` = hypothesis
    stream scored against reference ``s``.  Missing hypotheses count as empty.
    """
    refs = [_tokens(r) for r in refs]
    hyps = [_tokens(h) for h in hyps] + [[] for _ in range(len(refs) - len(hyps))]
    n = max(len(refs), len(hyps))
    refs = refs + [[] for _ in range(n - len(refs))]
    table = [[edit_distance(refs[s], hyps[i]) for s in range(n)] for i in range(n)]
    best, best_err = None, None
    for perm in itertools.permutations(range(n)):
        err = sum(sum(table[perm[s]][s]) for s in range(n))
        if best is None or err < best_err:
            best, best_err = perm, err
    out = WerBreakdown(reference_words=sum(len(r) for r in refs))
    for s in range(n):
        sub, ins, dele = table[best[s]][s]
        out.substitutions += sub
        out.insertions += ins
        out.deletions += dele
    return out, best


def pool_wer(items: Sequence[WerBreakdown]) -> WerBreakdown:
    """Micro-average: sum errors and reference words over utterances."""
    total = WerBreakdown()
    for it in items:
        total = total + it
    return total


# --------------------------------------------------------------------------
# DER


@dataclass
class DerBreakdown:
    miss_seconds: float = 0.0
    falarm_seconds: float = 0.0
    confusion_seconds: float = 0.0
    scored_speech_seconds: float = 0.0

    def _ratio(self, x: float) -> float:
        if self.scored_speech_seconds <= 0:
            raise ValueError("DER undefined: no scored reference speech")
        return x / self.scored_speech_seconds

    @property
    def mi(self) -> float:
        return self._ratio(self.miss_seconds)

    @property
    def fa(self) -> float:
        return self._ratio(self.falarm_seconds)

    @property
    def cf(self) -> float:
        return self._ratio(self.confusion_seconds)

    @property
    def der(self) -> float:
        return self._ratio(self.miss_seconds + self.falarm_seconds + self.confusion_seconds)

    def __add__(self, other: "DerBreakdown") -> "DerBreakdown":
        return DerBreakdown(self.miss_seconds + other.miss_seconds, self.falarm_seconds + other.falarm_seconds,
                            self.confusion_seconds + other.confusion_seconds,
                            self.scored_speech_seconds + other.scored_speech_seconds)

    def to_dict(self) -> dict:
        return {**asdict(self), "mi": self.mi, "fa": self.fa, "cf": self.cf, "der": self.der}


def _scored_segments(reference: DiarTimeline, hypothesis: DiarTimeline, collar: float):
    """Elementary segments outside the collar zones: (duration, ref set, hyp set)."""
    zones = []
    for iv in reference:
        for b in (iv.onset, iv.offset):
            zones.append((b - collar, b + collar))
    points = {0.0}
    for tl in (reference, hypothesis):
        for iv in tl:
            points.update((iv.onset, iv.offset))
    for a, b in zones:
        points.update((max(0.0, a), b))
    pts = sorted(points)
    segs = []
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        if collar > 0 and any(lo < mid < hi for lo, hi in zones):
            continue
        r = frozenset(iv.speaker for iv in reference if iv.onset <= mid < iv.offset)
        h = frozenset(iv.speaker for iv in hypothesis if iv.onset <= mid < iv.offset)
        if r or h:
            segs.append((b - a, r, h))
    return segs


def best_speaker_mapping(reference: DiarTimeline, hypothesis: DiarTimeline, collar: float = 0.0) -> dict:
    """Hypothesis -> reference speaker map maximising jointly-attributed scored time."""
    segs = _scored_segments(reference, hypothesis, collar)
    rs, hs = reference.speakers(), hypothesis.speakers()
    n = max(len(rs), len(hs))
    if n > 8:
        raise ValueError("exhaustive speaker mapping supports at most 8 speakers")
    overlap = np.zeros((len(hs), len(rs)))
    for dur, r, h in segs:
        for i, hspk in enumerate(hs):
            if hspk in h:
                for j, rspk in enumerate(rs):
                    if rspk in r:
                        overlap[i, j] += dur
    best, best_val = {}, -1.0
    for perm in itertools.permutations(range(n), len(hs)):
        val = sum(overlap[i, j] for i, j in enumerate(perm) if j < len(rs))
        if val > best_val + 1e-12:
            best_val = val
            best = {hs[i]: rs[j] for i, j in enumerate(perm) if j < len(rs)}
    return best


def der_components(reference: DiarTimeline, hypothesis: DiarTimeline, collar: float = 0.25) -> DerBreakdown:
    """Seconds of miss / false alarm / confusion and scored speech (no ratio)."""
    if collar < 0:
        raise ValueError("collar must be >= 0")
    mapping = best_speaker_mapping(reference, hypothesis, collar)
    out = DerBreakdown()
    for dur, r, h in _scored_segments(reference, hypothesis, collar):
        n_ref, n_hyp = len(r), len(h)
        n_correct = sum(1 for spk in h if mapping.get(spk) in r)
        out.scored_speech_seconds += n_ref * dur
        out.miss_seconds += max(0, n_ref - n_hyp) * dur
        out.falarm_seconds += max(0, n_hyp - n_ref) * dur
        out.confusion_seconds += (min(n_ref, n_hyp) - n_correct) * dur
    return out


def der(reference: DiarTimeline, hypothesis: DiarTimeline, collar_seconds: float = 0.25) -> DerBreakdown:
    """Diarization error with ``collar_seconds`` excluded around reference boundaries.

    Overlapped speech is scored.  Raises when nothing is left to score.
    """
    out = der_components(reference, hypothesis, collar_seconds)
    if out.scored_speech_seconds <= 0:
        raise ValueError("DER undefined: no scored reference speech")
    return out


# --------------------------------------------------------------------------
# RTTM


def parse_rttm(text: str) -> DiarTimeline:
    """Parse ``SPEAKER`` lines; ``<NA>`` fields are ignored."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        if fields[0] != "SPEAKER" or len(fields) < 8:
            raise RTTMParseError(f"line {lineno}: expected a SPEAKER record with >= 8 fields: {line!r}")
        try:
            onset, dur = float(fields[3]), float(fields[4])
        except ValueError:
            raise RTTMParseError(f"line {lineno}: non-numeric onset/duration in {line!r}") from None
        if dur <= 0:
            raise RTTMParseError(f"line {lineno}: non-positive duration {dur}")
        rows.append((fields[7], onset, round(onset + dur, 6)))
    return DiarTimeline(rows)


def evaluation_report(wer: WerBreakdown | None = None, der_: DerBreakdown | None = None,
                      per_utterance: Sequence[dict] = ()) -> dict:
    """JSON-ready report ``{wer: {...}, der: {mi, fa, cf, der}, per_utterance: [...]}``."""
    report: dict = {"per_utterance": list(per_utterance)}
    if wer is not None:
        report["wer"] = wer.to_dict()
    if der_ is not None:
        report["der"] = der_.to_dict() if der_.scored_speech_seconds > 0 else None
    return report
