"""Training loops: backbone pretraining, Sidecar training, diarization adaptation."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .backbone import Backbone, greedy_decode
from .diarize import SegmentPlan, plan_segments
from .mixer import Mixture
from .objectives import adaptation_loss, combined_loss, ctc_loss_batch
from .optim import Adam, TriStageSchedule
from .sidecar import MultiTalkerModel
from .tensor import Tape

log = logging.getLogger(__name__)


class TrainingDivergence(RuntimeError):
    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 2e-4
    steps: int = 3000
    batch_size: int = 8
    warmup_frac: float = 0.1
    hold_frac: float = 0.4
    grad_clip: float | None = 5.0
    seed: int = 0

    def schedule(self) -> TriStageSchedule:
        return TriStageSchedule(self.lr, self.steps, self.warmup_frac, self.hold_frac)


def pad_batch(waves: Sequence[np.ndarray], hop: int) -> np.ndarray:
    """Right-pad with silence to a common whole number of frames."""
    n = max(len(w) for w in waves)
    n = int(math.ceil(n / hop) * hop)
    out = np.zeros((len(waves), n))
    for i, w in enumerate(waves):
        out[i, :len(w)] = w
    return out


def pad_activity(acts: Sequence[np.ndarray], n_frames: int) -> np.ndarray:
    out = np.zeros((len(acts), acts[0].shape[0], n_frames))
    for i, a in enumerate(acts):
        k = min(n_frames, a.shape[1])
        out[i, :, :k] = a[:, :k]
    return out


class _Logger:
    """Append-only JSON-lines sink (flushed per record)."""

    def __init__(self, path):
        self._fh = open(path, "a") if path else None

    def write(self, row: dict) -> None:
        if self._fh:
            self._fh.write(json.dumps(row) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh:
            self._fh.close()


def _check_finite(step: int, value: float) -> None:
    if not math.isfinite(value):
        raise TrainingDivergence(step, value)


def pretrain_single_talker(backbone: Backbone, dataset: Sequence[Mixture], config: OptimConfig = OptimConfig(),
                           log_path=None, callback: Callable | None = None) -> tuple[Backbone, list[float]]:
    """CTC-train the backbone on single-speaker items; returns (backbone, per-step losses)."""
    if backbone.frozen:
        raise ValueError("cannot pretrain a frozen backbone")
    if not dataset and config.steps:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    opt = Adam(backbone.parameters(), lr=config.lr, grad_clip=config.grad_clip)
    sched = config.schedule()
    hop = backbone.config.hop
    losses = []
    sink = _Logger(log_path)
    try:
        for step in range(config.steps):
            idx = rng.choice(len(dataset), size=min(config.batch_size, len(dataset)), replace=False)
            batch = [dataset[i] for i in idx]
            wav = pad_batch([m.waveform for m in batch], hop)
            targets = [m.transcripts[0] for m in batch]
            opt.zero_grad()
            with Tape() as tape:
                logits = backbone(wav)
                loss = T.mean(ctc_loss_batch(T.log_softmax(logits, axis=-1), targets))
            value = float(loss.data)
            _check_finite(step, value)
            tape.backward(loss)
            opt.step(sched(step))
            losses.append(value)
            sink.write({"step": step, "loss": value, "ctc": value, "diar": 0.0})
            if callback:
                callback(step, value)
    finally:
        sink.close()
    return backbone, losses


def train_sidecar(model: MultiTalkerModel, dataset: Sequence[Mixture], lam: float = 0.01,
                  config: OptimConfig = OptimConfig(), log_path=None,
                  callback: Callable | None = None) -> list[dict]:
    """Optimise only Sidecar + flank convs + diarization branch on combined_loss."""
    if not model.backbone.frozen:
        raise ValueError("backbone must be frozen before Sidecar training")
    S = model.sidecar.config.n_speakers
    for m in dataset:
        if m.n_speakers != S:
            raise ValueError(f"corpus item {m.mixture_id!r} has {m.n_speakers} speakers, model expects {S}")
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.sidecar.parameters(), lr=config.lr, grad_clip=config.grad_clip)
    sched = config.schedule()
    history = []
    # the backbone is frozen, so lower-encoder embeddings are fixed per item
    cache: dict[int, np.ndarray] = {}
    sink = _Logger(log_path)
    try:
        for step in range(config.steps):
            idx = rng.choice(len(dataset), size=min(config.batch_size, len(dataset)), replace=False)
            batch = [dataset[i] for i in idx]
            for i in idx:
                if i not in cache:
                    cache[i] = model.embed(dataset[i].waveform)
            opt.zero_grad()
            with Tape() as tape:
                logits, D = model.from_embedding(model.embed_batch([cache[i] for i in idx]))
                ref = pad_activity([m.activity for m in batch], D.shape[2])
                loss, _, parts = combined_loss(logits, [m.transcripts for m in batch], D, ref, lam)
            value = float(loss.data)
            _check_finite(step, value)
            tape.backward(loss)
            opt.step(sched(step))
            row = {"step": step, "loss": value, "ctc": parts["ctc"], "diar": parts["diar"]}
            history.append(row)
            sink.write(row)
            if callback:
                callback(step, row)
    finally:
        sink.close()
    return history


def segment_recording(mixture: Mixture, plan: SegmentPlan, hop: int):
    """(start_frame, waveform chunk, reference chunk) per planned segment."""
    n_frames = len(mixture.waveform) // hop
    out = []
    for start, end in plan_segments(n_frames, plan):
        out.append((start, mixture.waveform[start * hop:end * hop], mixture.activity[:, start:end]))
    return out


def adapt_diarization(model: MultiTalkerModel, conversations: Sequence[Mixture],
                      plan: SegmentPlan = SegmentPlan(), config: OptimConfig = OptimConfig(steps=50),
                      log_path=None) -> list[dict]:
    """Diarization-only adaptation on segmented long recordings."""
    if not model.backbone.frozen:
        raise ValueError("backbone must be frozen before adaptation")
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.sidecar.parameters(), lr=config.lr, grad_clip=config.grad_clip)
    sched = config.schedule()
    hop = model.backbone.config.hop
    history = []
    sink = _Logger(log_path)
    try:
        for step in range(config.steps):
            conv = conversations[int(rng.integers(len(conversations)))]
            segs = segment_recording(conv, plan, hop)
            opt.zero_grad()
            with Tape() as tape:
                Ds = [model.diarization(chunk)[0] for _, chunk, _ in segs]
                loss, _ = adaptation_loss(Ds, [r[:, :d.shape[1]] for (_, _, r), d in zip(segs, Ds)],
                                          [s for s, _, _ in segs])
            value = float(loss.data)
            _check_finite(step, value)
            tape.backward(loss)
            opt.step(sched(step))
            row = {"step": step, "loss": value, "ctc": 0.0, "diar": value}
            history.append(row)
            sink.write(row)
    finally:
        sink.close()
    return history


def token_error_rate(backbone: Backbone, dataset: Sequence[Mixture], batch_size: int = 16) -> float:
    """Greedy-decode token error rate of the backbone alone on single-speaker items."""
    from .metrics import edit_distance

    errs = words = 0
    hop = backbone.config.hop
    for i in range(0, len(dataset), batch_size):
        batch = dataset[i:i + batch_size]
        logits = backbone(pad_batch([m.waveform for m in batch], hop)).data
        for m, lg in zip(batch, logits):
            s, ins, d = edit_distance(m.transcripts[0], greedy_decode(lg))
            errs += s + ins + d
            words += len(m.transcripts[0])
    return errs / max(1, words)
