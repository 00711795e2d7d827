"""AdamW with decoupled weight decay and a cosine learning-rate schedule."""

from __future__ import annotations

import math

import numpy as np

from ..tensor import Tensor


def cosine_lr(step: int, total: int, lr_init: float, lr_final: float) -> float:
    """lr_final + (lr_init - lr_final) * (1 + cos(pi * step / total)) / 2."""
    if total <= 0:
        return lr_init
    t = min(max(step, 0), total) / total
    return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + math.cos(math.pi * t))


def decays(name: str, t: Tensor) -> bool:
    """Weight decay applies to matrices/kernels only; A_log is excluded like other SSM dynamics."""
    return t.ndim >= 2 and not name.endswith("A_log")


class AdamW:
    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.99,
                 eps: float = 1e-8, weight_decay: float = 0.05):
        self.params = params
        self.beta1, self.beta2, self.eps, self.weight_decay = beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.t = 0

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def grad_norm(self) -> float:
        return math.sqrt(sum(float(np.sum(t.grad**2)) for t in self.params.values() if t.grad is not None))

    def clip(self, max_norm: float) -> float:
        """Rescale all gradients so their global norm is at most ``max_norm``; returns the norm before."""
        norm = self.grad_norm()
        if norm > max_norm:
            for t in self.params.values():
                if t.grad is not None:
                    t.grad = t.grad * (max_norm / norm)
        return norm

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            if self.weight_decay and decays(k, p):
                p.data *= 1.0 - lr * self.weight_decay
            p.data -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {"__step__": np.array([self.t], dtype=np.float64)}
        for k in self.params:
            out[f"m:{k}"] = self.m[k]
            out[f"v:{k}"] = self.v[k]
        return out
