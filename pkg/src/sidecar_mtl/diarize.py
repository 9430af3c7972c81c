"""Long-recording diarization: overlapping segments, stream alignment, averaging.

A recording is cut into windows that share an interval with their
neighbour.  Each window's per-speaker activity is re-ordered to best match
the (already re-ordered) previous window on the shared frames, then shared
frames are averaged and the global activity is thresholded once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .objectives import best_permutation
from .timeline import DiarTimeline, Interval, activity_from_timeline, timeline_from_activity

__all__ = [
    "SegmentPlan", "SegmentActivity", "plan_segments", "align_permutation", "stitch",
    "activity_to_decisions", "timeline_from_activity", "activity_from_timeline", "to_rttm",
    "DiarTimeline", "Interval",
]


@dataclass(frozen=True)
class SegmentPlan:
    segment_seconds: float = 30.0
    shared_seconds: float = 15.0
    frame_ms: int = 20

    def __post_init__(self):
        if not 0 < self.shared_seconds < self.segment_seconds:
            raise ValueError(f"need 0 < shared ({self.shared_seconds}) < segment ({self.segment_seconds})")

    @property
    def segment_frames(self) -> int:
        return int(round(self.segment_seconds * 1000 / self.frame_ms))

    @property
    def hop_frames(self) -> int:
        return int(round((self.segment_seconds - self.shared_seconds) * 1000 / self.frame_ms))


@dataclass
class SegmentActivity:
    D: np.ndarray  # (S, T_seg) speech probabilities
    start_frame: int

    @property
    def end_frame(self) -> int:
        return self.start_frame + self.D.shape[1]


def plan_segments(total_frames: int, plan: SegmentPlan = SegmentPlan()) -> list[tuple[int, int]]:
    """Half-open frame ranges covering ``[0, total_frames)``; the last is truncated."""
    if total_frames < 1:
        raise ValueError("total_frames must be >= 1")
    hop, seg = plan.hop_frames, plan.segment_frames
    if hop <= 0:
        raise ValueError(f"non-positive hop ({hop} frames)")
    out = []
    start = 0
    while True:
        end = min(start + seg, total_frames)
        out.append((start, end))
        if end >= total_frames:
            return out
        start += hop


def align_permutation(prev_shared, next_shared) -> tuple[int, ...]:
    """Permutation of ``next`` streams closest (squared Euclidean) to ``prev``.

    ``next_shared[perm]`` is the re-ordered activity; ties go to the
    lexicographically smallest permutation.
    """
    prev = np.asarray(prev_shared, dtype=np.float64)
    nxt = np.asarray(next_shared, dtype=np.float64)
    if prev.shape != nxt.shape or prev.ndim != 2:
        raise ValueError(f"align_permutation: shapes {prev.shape} and {nxt.shape} differ")
    cost = ((prev[None, :, :] - nxt[:, None, :]) ** 2).sum(axis=2)  # cost[i, s]: next i vs prev s
    return best_permutation(cost)[0]


def stitch(segments: Sequence[SegmentActivity], return_permutations: bool = False):
    """Chain alignments left to right and average overlapping frames -> (S, T_total)."""
    if not segments:
        raise ValueError("stitch: no segments")
    S = segments[0].D.shape[0]
    total = max(s.end_frame for s in segments)
    acc = np.zeros((S, total))
    cnt = np.zeros(total)
    prev = None
    perms = []
    for seg in segments:
        D = np.asarray(seg.D, dtype=np.float64)
        if D.shape[0] != S:
            raise ValueError(f"stitch: segment has {D.shape[0]} streams, expected {S}")
        if prev is None:
            if seg.start_frame != 0:
                raise ValueError("stitch: first segment must start at frame 0")
            perm = tuple(range(S))
        else:
            lo = seg.start_frame
            hi = min(prev.end_frame, seg.end_frame)
            if lo <= prev.start_frame or hi - lo < 1:
                raise ValueError(f"stitch: segment [{seg.start_frame}, {seg.end_frame}) does not overlap "
                                 f"[{prev.start_frame}, {prev.end_frame})")
            perm = align_permutation(prev.D[:, lo - prev.start_frame:hi - prev.start_frame], D[:, :hi - lo])
        D = D[list(perm)]
        perms.append(perm)
        acc[:, seg.start_frame:seg.end_frame] += D
        cnt[seg.start_frame:seg.end_frame] += 1
        prev = SegmentActivity(D, seg.start_frame)
    if np.any(cnt == 0):
        raise ValueError("stitch: segments leave frames uncovered")
    out = acc / cnt
    return (out, perms) if return_permutations else out


def activity_to_decisions(D) -> np.ndarray:
    """Speaker active iff probability is strictly greater than 0.5."""
    return (np.asarray(D.data if hasattr(D, "data") else D) > 0.5).astype(np.int64)


def to_rttm(timeline: DiarTimeline, recording_id: str) -> str:
    """RTTM lines sorted by onset then speaker; times printed to 0.01 s."""
    rows = sorted(timeline, key=lambda iv: (iv.onset, iv.speaker))
    return "".join(f"SPEAKER {recording_id} 1 {iv.onset:.2f} {iv.duration:.2f} <NA> <NA> {iv.speaker} <NA> <NA>\n"
                   for iv in rows)
