"""AdamW with linear warmup and optional linear decay.

Decoupled weight decay is applied only to matrix-shaped parameters; biases,
layer-norm gains, and other vectors are never decayed.  Frozen parameter
groups are skipped entirely, so neither weights nor moment estimates move.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ModelParameters


@dataclass
class OptimizerConfig:
    lr: float = 1e-5
    warmup_ratio: float = 0.2
    total_steps: int = 1000
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    schedule: str = "linear"  # linear (decay to 0) | constant after warmup


class AdamW:
    def __init__(self, params: ModelParameters, cfg: OptimizerConfig):
        self.cfg = cfg
        self.params = params
        self.m = {k: np.zeros_like(v) for k, v in params.values.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.values.items()}
        self.t = 0

    def lr_at(self, step: int) -> float:
        warmup = max(int(self.cfg.total_steps * self.cfg.warmup_ratio), 1)
        if step < warmup:
            return self.cfg.lr * (step + 1) / warmup
        if self.cfg.schedule == "constant":
            return self.cfg.lr
        remaining = max(self.cfg.total_steps - warmup, 1)
        return self.cfg.lr * max(0.0, 1.0 - (step - warmup) / remaining)

    def step(self, grads: dict[str, np.ndarray]) -> float:
        lr = self.lr_at(self.t)
        b1, b2 = self.cfg.betas
        self.t += 1
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for name, value in self.params.values.items():
            if self.params.frozen(name):
                continue
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / bc1
            vhat = self.v[name] / bc2
            update = mhat / (np.sqrt(vhat) + self.cfg.eps)
            if value.ndim >= 2 and self.cfg.weight_decay:
                update = update + self.cfg.weight_decay * value
            value -= lr * update
        return lr
