"""Adam optimizer over `Parameter` objects."""

from __future__ import annotations

import numpy as np

from .errors import UsageError


class AdamState:
    """Per-parameter first/second moment buffers plus the shared step count.

    Defaults follow the common Adam configuration (lr=0.01 is the usual
    choice for two-layer GCN training).
    """

    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.t = 0
        self.m = {p.id: np.zeros_like(p.data) for p in params}
        self.v = {p.id: np.zeros_like(p.data) for p in params}


def adam_step(params, state: AdamState):
    """One bias-corrected Adam update for every parameter, then zero grads."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for p in params:
        m = state.m.get(p.id)
        if m is None:
            raise UsageError(f"adam_step: no state for parameter {p.name!r}")
        v = state.v[p.id]
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        p.zero_grad()
