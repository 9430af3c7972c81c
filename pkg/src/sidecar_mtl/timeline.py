"""Speaker-activity intervals in seconds, and conversion to/from frame grids."""

from __future__ import annotations

from typing import Iterable, NamedTuple

import numpy as np


class Interval(NamedTuple):
    speaker: str
    onset: float
    offset: float

    @property
    def duration(self) -> float:
        return self.offset - self.onset


class DiarTimeline:
    """Per-speaker, non-overlapping, sorted speech intervals.

    Touching or overlapping intervals of one speaker are merged on
    construction so the invariant always holds.
    """

    def __init__(self, intervals: Iterable = ()):
        by_spk: dict[str, list[tuple[float, float]]] = {}
        for spk, on, off in intervals:
            on, off = float(on), float(off)
            if not off > on:
                raise ValueError(f"interval for {spk} has offset {off} <= onset {on}")
            by_spk.setdefault(str(spk), []).append((on, off))
        merged: list[Interval] = []
        for spk, segs in by_spk.items():
            segs.sort()
            cur_on, cur_off = segs[0]
            for on, off in segs[1:]:
                if on <= cur_off:
                    cur_off = max(cur_off, off)
                else:
                    merged.append(Interval(spk, cur_on, cur_off))
                    cur_on, cur_off = on, off
            merged.append(Interval(spk, cur_on, cur_off))
        merged.sort(key=lambda iv: (iv.onset, iv.speaker, iv.offset))
        self.intervals: list[Interval] = merged

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __eq__(self, other) -> bool:
        return isinstance(other, DiarTimeline) and self.intervals == other.intervals

    def __repr__(self) -> str:
        return f"DiarTimeline({self.intervals!r})"

    def speakers(self) -> list[str]:
        return sorted({iv.speaker for iv in self.intervals})

    def for_speaker(self, speaker: str) -> list[Interval]:
        return [iv for iv in self.intervals if iv.speaker == speaker]

    def total_speech(self) -> float:
        return sum(iv.duration for iv in self.intervals)

    def relabel(self, mapping: dict[str, str]) -> "DiarTimeline":
        return DiarTimeline((mapping.get(iv.speaker, iv.speaker), iv.onset, iv.offset) for iv in self.intervals)

    def rounded(self, ndigits: int = 2) -> "DiarTimeline":
        return DiarTimeline((iv.speaker, round(iv.onset, ndigits), round(iv.offset, ndigits))
                            for iv in self.intervals)

    def close_to(self, other: "DiarTimeline", tol: float) -> bool:
        if len(self) != len(other):
            return False
        return all(a.speaker == b.speaker and abs(a.onset - b.onset) <= tol and abs(a.offset - b.offset) <= tol
                   for a, b in zip(self.intervals, other.intervals))


def timeline_from_activity(activity, frame_ms: float = 20, speakers=None) -> DiarTimeline:
    """Maximal runs of active frames -> intervals [start, end+1) * frame duration."""
    act = np.asarray(activity).astype(bool)
    if act.ndim != 2:
        raise ValueError(f"activity must be (S, T), got shape {act.shape}")
    labels = list(speakers) if speakers is not None else [f"spk{s}" for s in range(act.shape[0])]
    step = frame_ms / 1000.0
    out = []
    for s, row in enumerate(act):
        padded = np.concatenate([[False], row, [False]])
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        for start, end in zip(edges[0::2], edges[1::2]):
            out.append((labels[s], start * step, end * step))
    return DiarTimeline(out)


def activity_from_timeline(timeline: DiarTimeline, n_frames: int, frame_ms: float = 20,
                           speakers=None) -> np.ndarray:
    """Frame grid (S, n_frames): frame t is active if any speech overlaps it."""
    labels = list(speakers) if speakers is not None else timeline.speakers()
    index = {spk: i for i, spk in enumerate(labels)}
    step = frame_ms / 1000.0
    act = np.zeros((len(labels), n_frames), dtype=np.int64)
    for iv in timeline:
        if iv.speaker not in index:
            raise KeyError(f"speaker {iv.speaker!r} not in {labels}")
        # small tolerance so frame-aligned boundaries do not spill into a neighbour
        start = int(np.floor(iv.onset / step + 1e-9))
        end = int(np.ceil(iv.offset / step - 1e-9))
        act[index[iv.speaker], max(0, start):min(n_frames, end)] = 1
    return act
