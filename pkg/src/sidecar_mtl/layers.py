"""Parameter containers and the handful of layers the models are built from."""

from __future__ import annotations

import hashlib
import math
from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Base class that discovers parameters and sub-modules from attributes.

    Parameters are the ``Tensor`` attributes, visited in assignment order, so
    ``named_parameters`` is stable across runs.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(val, Tensor):
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Tensor):
                        yield f"{name}.{i}", item

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def requires_grad_(self, flag: bool) -> "Module":
        for p in self.parameters():
            p.requires_grad = flag
            if not flag:
                p.grad = None
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise T.ShapeError(f"{name}: checkpoint shape {arr.shape} != parameter shape {p.shape}")
            p.data = arr.copy()

    def parameter_hash(self) -> str:
        h = hashlib.sha256()
        for name, p in self.named_parameters():
            h.update(name.encode())
            h.update(T.dumps(p.data))
        return h.hexdigest()


def _param(data: np.ndarray) -> Tensor:
    return Tensor(data, requires_grad=True)


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in) / math.sqrt(1 + 5.0)  # a=sqrt(5), as torch's default
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """y = x @ W + b over the last axis."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = _param(kaiming_uniform(rng, (n_in, n_out), n_in))
        self.bias = _param(rng.uniform(-1, 1, n_out) / math.sqrt(n_in)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = T.matmul(x, self.weight)
        return T.add(y, self.bias) if self.bias is not None else y


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, *,
                 stride: int = 1, dilation: int = 1, groups: int = 1, padding=0, bias: bool = True):
        fan_in = (c_in // groups) * kernel
        self.weight = _param(kaiming_uniform(rng, (c_out, c_in // groups, kernel), fan_in))
        self.bias = _param(rng.uniform(-1, 1, c_out) / math.sqrt(fan_in)) if bias else None
        self._cfg = dict(stride=stride, dilation=dilation, groups=groups, padding=padding)

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv1d(x, self.weight, self.bias, **self._cfg)


class LayerNorm(Module):
    """Layer norm over the last axis (transformer style)."""

    def __init__(self, dim: int, eps: float = 1e-5):
        self.scale = _param(np.ones(dim))
        self.shift = _param(np.zeros(dim))
        self._eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.scale, self.shift, axes=(-1,), eps=self._eps)


class GlobalLayerNorm(Module):
    """Conv-TasNet gLN: statistics over (C, T) per item, per-channel scale/shift."""

    def __init__(self, channels: int, eps: float = 1e-8):
        self.scale = _param(np.ones((channels, 1)))
        self.shift = _param(np.zeros((channels, 1)))
        self._eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.scale, self.shift, axes=(1, 2), eps=self._eps)


class PReLU(Module):
    def __init__(self, channels: int, init: float = 0.25):
        self.slope = _param(np.full(channels, init))

    def __call__(self, x: Tensor) -> Tensor:
        return T.prelu(x, self.slope, axis=1)
