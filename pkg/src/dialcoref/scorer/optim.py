"""Adam with decoupled weight decay and global-norm gradient clipping."""

from __future__ import annotations

import numpy as np


def clip_global_norm(grads: dict, max_norm: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= scale
    return norm


class AdamW:
    def __init__(self, params: dict, lr: dict | float, weight_decay=1e-2, betas=(0.9, 0.999),
                 eps=1e-8, clip_norm=1.0):
        self.params = params
        self.lr = lr if isinstance(lr, dict) else {k: lr for k in params}
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict) -> float:
        norm = clip_global_norm(grads, self.clip_norm)
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            lr = self.lr[name]
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p *= 1.0 - lr * self.weight_decay
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return norm
