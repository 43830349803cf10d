"""Adam optimizer over named parameter groups."""

from __future__ import annotations

import numpy as np


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self):
        self.step = 0
        self.m = {}
        self.v = {}


def adam_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam update, in place.

    `params` is a dict name -> Tensor, `grads` name -> ndarray. Raises on NaN
    gradients rather than silently corrupting the run.
    """
    b1, b2 = betas
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if np.isnan(g).any():
            raise FloatingPointError(f"NaN gradient for parameter '{name}'")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p.data)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / (1.0 - b1**t)
        vhat = v / (1.0 - b2**t)
        p.data -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(p.data.dtype)


class Adam:
    """Adam over one or more {name: Tensor} groups with per-group learning rates."""

    def __init__(self, groups, betas=(0.9, 0.999), eps=1e-8):
        # groups: list of (params_dict, lr)
        self.groups = [(dict(params), float(lr)) for params, lr in groups]
        self.betas = betas
        self.eps = eps
        self.states = [AdamState() for _ in self.groups]

    def zero_grad(self):
        for params, _ in self.groups:
            for p in params.values():
                p.zero_grad()

    def step(self):
        for (params, lr), state in zip(self.groups, self.states):
            grads = {name: p.grad for name, p in params.items() if p.grad is not None}
            adam_step(params, grads, state, lr, self.betas, self.eps)
