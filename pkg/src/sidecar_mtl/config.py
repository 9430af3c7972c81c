"""Flat run configuration shared by every CLI command.

Precedence, lowest to highest: field defaults, the JSON ``--config`` file,
the ``SIDECAR_MTL_SEED`` environment variable (seed only), explicit flags.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from .backbone import DEFAULT_VOCAB, BackboneConfig
from .diarize import SegmentPlan
from .mixer import STYLES
from .sidecar import SidecarConfig
from .train import OptimConfig

SEED_ENV = "SIDECAR_MTL_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # backbone
    sample_rate: int = 8000
    frame_ms: int = 20
    extractor_spec: tuple = ((10, 5, 32), (8, 32, 64))
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 4
    ffn_dim: int = 128
    vocab: tuple = DEFAULT_VOCAB
    insertion_layer: int = 2
    distance_bias: bool = False
    # sidecar (io_channels always equals d_model)
    bottleneck_channels: int = 32
    hidden_channels: int = 64
    kernel: int = 3
    blocks: int = 4
    repeats: int = 1
    n_speakers: int = 2
    # segment plan
    segment_seconds: float = 30.0
    shared_seconds: float = 15.0
    # optimisation
    seed: int = 0
    lam: float = 0.01
    learning_rate: float = 2e-4
    max_updates: int = 3000
    batch_size: int = 8
    warmup_frac: float = 0.1
    hold_frac: float = 0.4
    grad_clip: float = 5.0
    # data generation
    style: str = "left-aligned"
    count: int = 100
    conversation_seconds: float = 73.0
    # evaluation
    collar: float = 0.25
    # paths
    train_data: str = ""
    eval_data: str = ""
    checkpoint: str = ""
    backbone_checkpoint: str = ""
    checkpoint_dir: str = ""
    audio: str = ""
    out: str = ""
    log_path: str = ""
    # param-report only: "toy" uses this config, "paper" the full-size one
    scale: str = "toy"

    def __post_init__(self):
        object.__setattr__(self, "extractor_spec", tuple(tuple(int(v) for v in s) for s in self.extractor_spec))
        object.__setattr__(self, "vocab", tuple(self.vocab))
        if self.style not in STYLES:
            raise ConfigError(f"style must be one of {STYLES}, got {self.style!r}")
        if self.scale not in ("toy", "paper"):
            raise ConfigError(f"scale must be 'toy' or 'paper', got {self.scale!r}")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.learning_rate <= 0 or self.max_updates < 0 or self.batch_size < 1 or self.count < 0:
            raise ConfigError("learning_rate > 0, max_updates >= 0, batch_size >= 1 and count >= 0 required")
        if self.collar < 0:
            raise ConfigError("collar must be >= 0")
        try:
            self.backbone_config()
            self.sidecar_config()
            self.segment_plan()
            self.optim_config().schedule()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def backbone_config(self) -> BackboneConfig:
        return BackboneConfig(self.sample_rate, self.frame_ms, self.extractor_spec, self.d_model, self.n_layers,
                              self.n_heads, self.ffn_dim, self.vocab, self.insertion_layer, self.distance_bias)

    def sidecar_config(self) -> SidecarConfig:
        return SidecarConfig(self.d_model, self.bottleneck_channels, self.hidden_channels, self.kernel,
                             self.blocks, self.repeats, self.n_speakers)

    def segment_plan(self) -> SegmentPlan:
        return SegmentPlan(self.segment_seconds, self.shared_seconds, self.frame_ms)

    def optim_config(self) -> OptimConfig:
        return OptimConfig(self.learning_rate, self.max_updates, self.batch_size, self.warmup_frac,
                           self.hold_frac, self.grad_clip, self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extractor_spec"] = [list(s) for s in self.extractor_spec]
        d["vocab"] = list(self.vocab)
        return d


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, text: str) -> Any:
    """Convert a flag string to the field's type; tuples are given as JSON."""
    kind = FIELD_TYPES[key]
    try:
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "tuple":
            return json.loads(text)
    except ValueError:
        raise ConfigError(f"--{key.replace('_', '-')}: cannot parse {text!r} as {kind}") from None
    return text


def load_config(path=None, overrides: dict | None = None, environ=None) -> RunConfig:
    values: dict[str, Any] = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        unknown = sorted(set(raw) - set(FIELD_TYPES))
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {unknown}")
        values.update(raw)
    env = os.environ if environ is None else environ
    if env.get(SEED_ENV):
        try:
            values["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    for key, val in (overrides or {}).items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
