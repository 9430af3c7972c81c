"""Conv-TasNet style Sidecar separator and the point-wise diarization branch.

Batch layout after separation is speaker-major within each item: row
``b * S + s`` holds speaker stream ``s`` of batch item ``b``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .backbone import Backbone, BackboneConfig, EncoderLayer
from .layers import Conv1d, GlobalLayerNorm, LayerNorm, Linear, Module, PReLU
from .tensor import ShapeError, Tensor


@dataclass(frozen=True)
class SidecarConfig:
    io_channels: int = 768
    bottleneck_channels: int = 128
    hidden_channels: int = 512
    kernel: int = 3
    blocks: int = 8
    repeats: int = 3
    n_speakers: int = 2

    def __post_init__(self):
        if self.n_speakers < 2:
            raise ValueError("n_speakers must be >= 2")
        if self.kernel % 2 != 1:
            raise ValueError("kernel must be odd for same-length padding")

    @property
    def dilations(self) -> list[int]:
        return [2 ** k for _ in range(self.repeats) for k in range(self.blocks)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def toy(cls, io_channels: int = 64, n_speakers: int = 2) -> "SidecarConfig":
        return cls(io_channels=io_channels, bottleneck_channels=32, hidden_channels=64, blocks=4, repeats=1,
                   n_speakers=n_speakers)


class ConvBlock(Module):
    """1x1 conv -> PReLU -> gLN -> depthwise dilated conv -> PReLU -> gLN -> 1x1 conv, residual."""

    def __init__(self, bottleneck: int, hidden: int, kernel: int, dilation: int, rng):
        self.conv_in = Conv1d(bottleneck, hidden, 1, rng)
        self.act1 = PReLU(hidden)
        self.norm1 = GlobalLayerNorm(hidden)
        self.depthwise = Conv1d(hidden, hidden, kernel, rng, dilation=dilation, groups=hidden,
                                padding=dilation * (kernel - 1) // 2)
        self.act2 = PReLU(hidden)
        self.norm2 = GlobalLayerNorm(hidden)
        self.conv_out = Conv1d(hidden, bottleneck, 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.norm1(self.act1(self.conv_in(x)))
        h = self.norm2(self.act2(self.depthwise(h)))
        return T.add(x, self.conv_out(h))


class DiarBranch(Module):
    """Bias-free point-wise 2-D conv from C channels to 1, then sigmoid."""

    def __init__(self, channels: int):
        self.weight = Tensor(np.zeros((1, channels, 1, 1)), requires_grad=True)

    def logits(self, masks: Tensor, batch: int, speakers: int) -> Tensor:
        BS, C, t = masks.shape
        if BS != batch * speakers:
            raise ShapeError(f"diar_activity: masks batch {BS} != B*S = {batch}*{speakers}")
        x = T.transpose(T.reshape(masks, (batch, speakers, C, t)), (0, 2, 1, 3))
        return T.reshape(T.pointwise_conv2d(x, self.weight), (batch, speakers, t))

    def __call__(self, masks: Tensor, batch: int, speakers: int) -> Tensor:
        return T.sigmoid(self.logits(masks, batch, speakers))


class Sidecar(Module):
    """Flank convs + TCN mask estimator + diarization branch (all trainable)."""

    def __init__(self, config: SidecarConfig = SidecarConfig(), seed: int = 0):
        rng = np.random.default_rng(seed)
        C, Bc, H, k = config.io_channels, config.bottleneck_channels, config.hidden_channels, config.kernel
        self.config = config
        self.in_conv = Conv1d(C, C, k, rng, padding=(k - 1) // 2)
        self.norm = GlobalLayerNorm(C)
        self.bottleneck = Conv1d(C, Bc, 1, rng)
        self.blocks = [ConvBlock(Bc, H, k, d, rng) for d in config.dilations]
        self.out_act = PReLU(Bc)
        self.mask_conv = Conv1d(Bc, config.n_speakers * C, 1, rng, bias=False)
        self.out_conv = Conv1d(C, C, k, rng, padding=(k - 1) // 2)
        self.branch = DiarBranch(C)

    def masks(self, filtered: Tensor) -> Tensor:
        B, C, t = filtered.shape
        h = self.bottleneck(self.norm(filtered))
        for block in self.blocks:
            h = block(h)
        m = T.relu(self.mask_conv(self.out_act(h)))
        return T.reshape(m, (B * self.config.n_speakers, C, t))

    def separate(self, mixed: Tensor) -> tuple[Tensor, Tensor]:
        """(B, C, T) mixed embedding -> (masks, separated), both (B*S, C, T)."""
        C, S = self.config.io_channels, self.config.n_speakers
        if mixed.ndim != 3 or mixed.shape[1] != C:
            raise ShapeError(f"separate: expected (B, {C}, T), got {mixed.shape}")
        if mixed.shape[2] < 1:
            raise ShapeError("separate: T must be >= 1")
        B, _, t = mixed.shape
        filtered = self.in_conv(mixed)
        masks = self.masks(filtered)
        prod = T.mul(T.reshape(masks, (B, S, C, t)), T.reshape(filtered, (B, 1, C, t)))
        separated = self.out_conv(T.reshape(prod, (B * S, C, t)))
        return masks, separated

    def diar_activity(self, masks: Tensor, batch: int, speakers: int | None = None) -> Tensor:
        return self.branch(masks, batch, speakers or self.config.n_speakers)


def diar_activity(masks: Tensor, weights, batch: int, speakers: int) -> Tensor:
    """D(b, s, t) = sigmoid(sum_c w(c) masks(b*S + s, c, t)) for a bare weight vector."""
    br = DiarBranch(masks.shape[1])
    w = weights if isinstance(weights, Tensor) else Tensor(weights)
    br.weight = T.reshape(w, (1, masks.shape[1], 1, 1))
    return br(masks, batch, speakers)


class MultiTalkerModel:
    """Frozen backbone with the Sidecar between layers k and k+1."""

    def __init__(self, backbone: Backbone, sidecar: Sidecar):
        if sidecar.config.io_channels != backbone.config.d_model:
            raise ValueError(f"Sidecar io_channels {sidecar.config.io_channels} != d_model {backbone.config.d_model}")
        self.backbone = backbone
        self.sidecar = sidecar

    def embed(self, waveform: np.ndarray) -> np.ndarray:
        """Lower-encoder embedding (C, T) of one unpadded waveform."""
        bb = self.backbone
        return bb.encode_lower(bb.extract_features(waveform)).data[0]

    def embed_batch(self, embeddings) -> Tensor:
        """Zero-pad per-item (C, T_i) embeddings to a (B, C, T_max) batch."""
        t = max(e.shape[1] for e in embeddings)
        out = np.zeros((len(embeddings), embeddings[0].shape[0], t))
        for i, e in enumerate(embeddings):
            out[i, :, :e.shape[1]] = e
        return Tensor(out)

    def __call__(self, waveform) -> tuple[Tensor, Tensor]:
        """Waveforms (B, N) -> logits (B, S, T, V) and activity D (B, S, T)."""
        bb = self.backbone
        return self.from_embedding(bb.encode_lower(bb.extract_features(waveform)))

    def from_embedding(self, emb: Tensor) -> tuple[Tensor, Tensor]:
        """Mixed embedding (B, C, T) -> logits (B, S, T, V) and D (B, S, T)."""
        bb, sc = self.backbone, self.sidecar
        B, _, t = emb.shape
        S = sc.config.n_speakers
        masks, separated = sc.separate(emb)
        logits = bb.decode(bb.encode_upper(separated))
        D = sc.diar_activity(masks, B, S)
        return T.reshape(logits, (B, S, t, logits.shape[-1])), D

    def diarization(self, waveform) -> Tensor:
        """Activity only (skips the upper encoder): (B, S, T)."""
        bb, sc = self.backbone, self.sidecar
        emb = bb.encode_lower(bb.extract_features(waveform))
        masks, _ = sc.separate(emb)
        return sc.diar_activity(masks, emb.shape[0])


# --------------------------------------------------------------------------
# parameter accounting (closed-form, no allocation)


def _conv(c_in, c_out, k, bias=True, groups=1):
    return c_out * (c_in // groups) * k + (c_out if bias else 0)


def sidecar_counts(cfg: SidecarConfig) -> dict[str, int]:
    C, Bc, H, k = cfg.io_channels, cfg.bottleneck_channels, cfg.hidden_channels, cfg.kernel
    block = _conv(Bc, H, 1) + H + 2 * H + _conv(H, H, k, groups=H) + H + 2 * H + _conv(H, Bc, 1)
    return {
        "in_conv": _conv(C, C, k),
        "tcn": 2 * C + _conv(C, Bc, 1) + block * cfg.blocks * cfg.repeats + Bc,
        "mask_conv": _conv(Bc, cfg.n_speakers * C, 1, bias=False),
        "out_conv": _conv(C, C, k),
        "diar_branch": C,
    }


def backbone_count(cfg: BackboneConfig) -> int:
    n = 0
    c_in = 1
    for kernel, _, ch in cfg.extractor_spec:
        n += _conv(c_in, ch, kernel)
        c_in = ch
    d, f = cfg.d_model, cfg.ffn_dim
    n += 2 * c_in + c_in * d + d
    layer = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * f + f) + (f * d + d)
    n += cfg.n_layers * layer + 2 * d + d * len(cfg.vocab) + len(cfg.vocab)
    return n


def param_report(sidecar_cfg: SidecarConfig, backbone_cfg: BackboneConfig) -> dict:
    """Exact per-component counts, totals and the trainable share."""
    parts = sidecar_counts(sidecar_cfg)
    trainable = sum(parts.values())
    frozen = backbone_count(backbone_cfg)
    return {**parts, "trainable": trainable, "backbone": frozen, "total": trainable + frozen,
            "trainable_ratio": trainable / (trainable + frozen)}
