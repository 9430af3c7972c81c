"""Toy single-talker CTC encoder that is pretrained once and then frozen.

Layout: a strided conv feature extractor producing one frame per
``frame_ms``, a projection, a pre-LN transformer encoder split at
``insertion_layer`` and a linear letter decoder.  Tensors crossing the split
use the (B, C, T) layout the separator expects.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .layers import Conv1d, LayerNorm, Linear, Module
from .tensor import ShapeError, Tensor

DEFAULT_VOCAB = ("<b>", "a", "b", "c", "d", "e", "f")


@dataclass(frozen=True)
class BackboneConfig:
    sample_rate: int = 8000
    frame_ms: int = 20
    # (kernel, stride, channels) per conv layer
    extractor_spec: tuple = ((10, 5, 32), (8, 32, 64))
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 4
    ffn_dim: int = 128
    vocab: tuple = DEFAULT_VOCAB
    insertion_layer: int = 2
    distance_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "extractor_spec", tuple(tuple(int(v) for v in s) for s in self.extractor_spec))
        object.__setattr__(self, "vocab", tuple(self.vocab))
        if not 1 <= self.insertion_layer <= self.n_layers - 1:
            raise ValueError(f"insertion_layer must be in [1, {self.n_layers - 1}], got {self.insertion_layer}")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.vocab[0] != "<b>":
            raise ValueError("vocab[0] must be the blank symbol '<b>'")
        hop = self.frame_ms * self.sample_rate / 1000
        if math.prod(s[1] for s in self.extractor_spec) != hop:
            raise ValueError(f"extractor stride product {math.prod(s[1] for s in self.extractor_spec)} "
                             f"!= frame hop {hop} samples")

    @property
    def hop(self) -> int:
        return self.frame_ms * self.sample_rate // 1000

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extractor_spec"] = [list(s) for s in self.extractor_spec]
        d["vocab"] = list(self.vocab)
        return d

    @classmethod
    def paper_scale(cls, **overrides) -> "BackboneConfig":
        """wav2vec 2.0 base sized encoder (parameter accounting only)."""
        spec = ((10, 5, 512), (3, 2, 512), (3, 2, 512), (3, 2, 512), (3, 2, 512), (2, 2, 512), (2, 2, 512))
        base = dict(sample_rate=16000, frame_ms=20, extractor_spec=spec, d_model=768, n_layers=12,
                    n_heads=12, ffn_dim=3072, vocab=DEFAULT_VOCAB[:1] + tuple("abcdefghijklmnopqrstuvwxyz'|")
                    + ("<unk>", "<pad>", "<s>"), insertion_layer=2)
        base.update(overrides)
        return cls(**base)


def alibi_slopes(n_heads: int) -> np.ndarray:
    """Per-head distance penalty slopes 2^(-8(h+1)/H)."""
    return 2.0 ** (-8.0 * (np.arange(n_heads) + 1) / n_heads)


def distance_penalty(n_heads: int, t: int) -> np.ndarray:
    pos = np.arange(t)
    dist = np.abs(pos[:, None] - pos[None, :])
    return -alibi_slopes(n_heads)[:, None, None] * dist[None]


def attention_scores(queries: Tensor, keys: Tensor, distance_bias: bool = False) -> Tensor:
    """Scaled dot-product scores for (B, H, T, d_head) queries/keys -> (B, H, T, T)."""
    d_head = queries.shape[-1]
    scores = T.mul(T.matmul(queries, T.transpose(keys, (0, 1, 3, 2))), 1.0 / math.sqrt(d_head))
    if distance_bias:
        scores = T.add(scores, distance_penalty(queries.shape[1], queries.shape[2]))
    return scores


def sinusoidal_positions(t: int, dim: int) -> np.ndarray:
    pos = np.arange(t)[:, None]
    freq = np.exp(-math.log(10000.0) * np.arange(0, dim, 2) / dim)
    pe = np.zeros((t, dim))
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq[: dim // 2])
    return pe


class EncoderLayer(Module):
    """Pre-LN transformer layer over (B, T, C)."""

    def __init__(self, d_model: int, n_heads: int, ffn_dim: int, rng: np.random.Generator,
                 distance_bias: bool):
        self.ln1 = LayerNorm(d_model)
        self.qkv = Linear(d_model, 3 * d_model, rng)
        self.proj = Linear(d_model, d_model, rng)
        self.ln2 = LayerNorm(d_model)
        self.ff1 = Linear(d_model, ffn_dim, rng)
        self.ff2 = Linear(ffn_dim, d_model, rng)
        self._heads = n_heads
        self._bias = distance_bias

    def __call__(self, x: Tensor) -> Tensor:
        B, t, C = x.shape
        H = self._heads
        qkv = self.qkv(self.ln1(x))
        qkv = T.transpose(T.reshape(qkv, (B, t, 3, H, C // H)), (2, 0, 3, 1, 4))
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = T.softmax(attention_scores(q, k, self._bias), axis=-1)
        ctx = T.reshape(T.transpose(T.matmul(attn, v), (0, 2, 1, 3)), (B, t, C))
        x = T.add(x, self.proj(ctx))
        return T.add(x, self.ff2(T.relu(self.ff1(self.ln2(x)))))


class Backbone(Module):
    """Single-talker encoder + decoder.  ``freeze`` makes it a frozen backbone."""

    def __init__(self, config: BackboneConfig = BackboneConfig(), seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = config
        convs = []
        c_in = 1
        for kernel, stride, ch in config.extractor_spec:
            convs.append(Conv1d(c_in, ch, kernel, rng, stride=stride, padding=(0, max(0, kernel - stride))))
            c_in = ch
        self.extractor = convs
        self.feat_norm = LayerNorm(c_in)
        self.feat_proj = Linear(c_in, config.d_model, rng)
        self.layers = [EncoderLayer(config.d_model, config.n_heads, config.ffn_dim, rng, config.distance_bias)
                       for _ in range(config.n_layers)]
        self.final_norm = LayerNorm(config.d_model)
        self.decoder = Linear(config.d_model, len(config.vocab), rng)
        self.frozen = False

    # -- frame arithmetic ----------------------------------------------------
    def num_frames(self, n_samples: int) -> int:
        """Frames produced for ``n_samples``: floor division at every layer."""
        n = n_samples
        for _, stride, _ in self.config.extractor_spec:
            n //= stride
        return n

    # -- forward pieces ------------------------------------------------------
    def extract_features(self, waveform) -> Tensor:
        """(N,) or (B, N) samples -> (B, C_feat, T); T = floor(N / hop)."""
        wav = waveform if isinstance(waveform, Tensor) else Tensor(waveform)
        if wav.ndim == 1:
            wav = T.reshape(wav, (1, wav.shape[0]))
        if wav.ndim != 2:
            raise ShapeError(f"extract_features: expected (N,) or (B, N) waveform, got {wav.shape}")
        if self.num_frames(wav.shape[1]) < 1:
            raise ValueError(f"waveform of {wav.shape[1]} samples is shorter than one frame "
                             f"({self.config.hop} samples)")
        x = T.reshape(wav, (wav.shape[0], 1, wav.shape[1]))
        for conv, (_, stride, _) in zip(self.extractor, self.config.extractor_spec):
            n_out = x.shape[2] // stride
            x = T.relu(conv(x))
            if x.shape[2] != n_out:
                x = x[:, :, :n_out]
        return x

    def _project(self, feats: Tensor) -> Tensor:
        x = self.feat_proj(self.feat_norm(T.transpose(feats, (0, 2, 1))))
        if not self.config.distance_bias:
            x = T.add(x, sinusoidal_positions(x.shape[1], self.config.d_model))
        return x

    def encode_lower(self, features: Tensor) -> Tensor:
        """Projection + layers 1..insertion_layer; returns (B, C, T)."""
        if features.ndim != 3 or features.shape[2] < 1:
            raise ShapeError(f"encode_lower: expected (B, C_feat, T>=1), got {features.shape}")
        x = self._project(features)
        for layer in self.layers[: self.config.insertion_layer]:
            x = layer(x)
        return T.transpose(x, (0, 2, 1))

    def encode_upper(self, embedding: Tensor) -> Tensor:
        """Layers insertion_layer+1..n_layers (+ final norm) on (B', C, T)."""
        if embedding.ndim != 3 or embedding.shape[1] != self.config.d_model:
            raise ShapeError(f"encode_upper: expected (B', {self.config.d_model}, T), got {embedding.shape}")
        if embedding.shape[2] < 1:
            raise ShapeError("encode_upper: zero-length input")
        x = T.transpose(embedding, (0, 2, 1))
        for layer in self.layers[self.config.insertion_layer:]:
            x = layer(x)
        return T.transpose(self.final_norm(x), (0, 2, 1))

    def decode(self, hidden: Tensor) -> Tensor:
        """(B', C, T) -> raw logits (B', T, V)."""
        if hidden.ndim != 3 or hidden.shape[1] != self.config.d_model:
            raise ShapeError(f"decode: expected (B', {self.config.d_model}, T), got {hidden.shape}")
        return self.decoder(T.transpose(hidden, (0, 2, 1)))

    def forward_monolithic(self, features: Tensor) -> Tensor:
        """All encoder layers in one pass, without the split-point layout change."""
        x = self._project(features)
        for layer in self.layers:
            x = layer(x)
        return T.transpose(self.final_norm(x), (0, 2, 1))

    def __call__(self, waveform) -> Tensor:
        return self.decode(self.encode_upper(self.encode_lower(self.extract_features(waveform))))


def freeze(backbone: Backbone) -> Backbone:
    """Disable gradients on every backbone parameter; idempotent."""
    backbone.requires_grad_(False)
    backbone.frozen = True
    return backbone


def greedy_decode(logits: np.ndarray) -> list[int]:
    """Best-path CTC decoding of (T, V) scores: collapse repeats, drop blanks."""
    best = np.argmax(np.asarray(logits), axis=-1)
    out = []
    prev = -1
    for tok in best:
        if tok != prev and tok != 0:
            out.append(int(tok))
        prev = tok
    return out
