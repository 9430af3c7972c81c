"""Adam and the warmup / hold / decay learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass(frozen=True)
class TriStageSchedule:
    """Linear warmup, constant hold, linear decay to ``final_scale * peak``."""

    peak_lr: float = 2e-4
    total_steps: int = 3000
    warmup_frac: float = 0.1
    hold_frac: float = 0.4
    init_scale: float = 0.01
    final_scale: float = 0.05

    def __post_init__(self):
        if self.warmup_frac < 0 or self.hold_frac < 0 or self.warmup_frac + self.hold_frac > 1:
            raise ValueError("stage fractions must be non-negative and sum to at most 1")

    def __call__(self, step: int) -> float:
        n = max(1, self.total_steps)
        warm = int(round(self.warmup_frac * n))
        hold = int(round(self.hold_frac * n))
        decay = max(1, n - warm - hold)
        if step < warm:
            frac = step / warm
            return self.peak_lr * (self.init_scale + (1 - self.init_scale) * frac)
        if step < warm + hold:
            return self.peak_lr
        frac = min(1.0, (step - warm - hold) / decay)
        return self.peak_lr * (1 - (1 - self.final_scale) * frac)


class Adam:
    def __init__(self, params: list[Tensor], lr=2e-4, betas=(0.9, 0.98), eps=1e-8,
                 grad_clip: float | None = None):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.grad_clip = grad_clip
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float((p.grad ** 2).sum()) for p in self.params if p.grad is not None)))

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        scale = 1.0
        if self.grad_clip is not None:
            norm = self.grad_norm()
            if norm > self.grad_clip:
                scale = self.grad_clip / norm
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None or not p.requires_grad:
                continue
            g = p.grad * scale
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            # fresh array: parameters are never mutated in place
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
