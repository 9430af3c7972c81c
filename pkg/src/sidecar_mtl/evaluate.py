"""Inference and scoring over corpora: permuted token WER, DER, stitched diarization."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .backbone import greedy_decode
from .diarize import SegmentActivity, SegmentPlan, activity_to_decisions, plan_segments, stitch
from .metrics import DerBreakdown, WerBreakdown, der_components, permuted_wer, pool_wer
from .mixer import Mixture
from .sidecar import MultiTalkerModel
from .timeline import DiarTimeline, timeline_from_activity


def transcribe(model: MultiTalkerModel, mixtures: Sequence[Mixture], batch_size: int = 16):
    """Greedy hypotheses (B lists of S token lists) and activity D per mixture."""
    hyps, acts = [], []
    for i in range(0, len(mixtures), batch_size):
        batch = mixtures[i:i + batch_size]
        logits, D = model.from_embedding(model.embed_batch([model.embed(m.waveform) for m in batch]))
        for b, m in enumerate(batch):
            n = m.n_frames
            hyps.append([greedy_decode(logits.data[b, s, :n]) for s in range(logits.shape[1])])
            acts.append(D.data[b, :, :n])
    return hyps, acts


def hypothesis_timeline(D: np.ndarray, frame_ms: int = 20) -> DiarTimeline:
    return timeline_from_activity(activity_to_decisions(D), frame_ms, [f"hyp{s}" for s in range(D.shape[0])])


def evaluate(model: MultiTalkerModel, mixtures: Sequence[Mixture], collar: float = 0.25,
             batch_size: int = 16) -> dict:
    """Pooled permuted WER and DER on short mixtures (no segmenting)."""
    S = model.sidecar.config.n_speakers
    for m in mixtures:
        if m.n_speakers != S:
            raise ValueError(f"{m.mixture_id or 'mixture'} has {m.n_speakers} speakers; model expects {S}")
    hyps, acts = transcribe(model, mixtures, batch_size)
    wers, ders, rows = [], [], []
    for m, hyp, D in zip(mixtures, hyps, acts):
        w, perm = permuted_wer(m.transcripts, hyp)
        d = der_components(m.timeline(), hypothesis_timeline(D, m.frame_ms), collar)
        wers.append(w)
        ders.append(d)
        rows.append({"id": m.mixture_id, "wer": w.wer, "errors": w.errors, "ref_words": w.reference_words,
                     "perm": list(perm), "der_scored": d.scored_speech_seconds,
                     "der_errors": d.miss_seconds + d.falarm_seconds + d.confusion_seconds})
    total_der = DerBreakdown()
    for d in ders:
        total_der = total_der + d
    return {"wer": pool_wer(wers), "der": total_der, "per_utterance": rows}


def diarize_recording(model: MultiTalkerModel, waveform: np.ndarray, plan: SegmentPlan = SegmentPlan(),
                      return_details: bool = False):
    """Segment, run the activity head per segment, stitch and threshold."""
    hop = model.backbone.config.hop
    n_frames = len(waveform) // hop
    segs = []
    for start, end in plan_segments(n_frames, plan):
        D = model.diarization(waveform[start * hop:end * hop]).data[0]
        segs.append(SegmentActivity(D, start))
    D = stitch(segs)
    tl = hypothesis_timeline(D, plan.frame_ms)
    if return_details:
        return tl, D, segs
    return tl


def token_wer(refs: Sequence[Sequence[int]], hyps: Sequence[Sequence[int]]) -> WerBreakdown:
    return permuted_wer(refs, hyps)[0]
