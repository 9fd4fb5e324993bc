from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REFERENCE_LR = 5e-5


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    base_lr: float = REFERENCE_LR
    total_steps: int | None = None
    skipped: int = 0


class Adam:
    """Adam with bias correction and a linear decay to zero, no warmup.

    The learning rate for the update after ``k`` completed steps is
    ``base_lr * max(0, 1 - k / total_steps)``; ``total_steps=None`` keeps it
    constant.
    """

    def __init__(self, named_params, lr: float = REFERENCE_LR, total_steps: int | None = None,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = dict(named_params)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.state = OptimizerState(base_lr=lr, total_steps=total_steps)
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def current_lr(self) -> float:
        s = self.state
        if s.total_steps is None:
            return s.base_lr
        return s.base_lr * max(0.0, 1.0 - s.step / s.total_steps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = np.zeros_like(p.data)

    def step(self) -> bool:
        """Apply one update; returns False (and counts it) if any gradient is non-finite."""
        s = self.state
        for p in self.params.values():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                s.skipped += 1
                return False
        lr = self.current_lr()
        t = s.step + 1
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m, v = s.m[name], s.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            if lr > 0:
                update = lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
                p.data -= update.astype(p.dtype)
        s.step = t
        return True
