"""Adam with bias correction."""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from noiselab.errors import ConfigError, NumericError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **hyper,
        )


def adam_step(params, grads, state: AdamState, lr_multiplier: float = 1.0):
    """One Adam update. Returns new parameter arrays; ``state`` is advanced in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigError("params, grads and optimizer state differ in length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ConfigError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
    state.t += 1
    lr = state.lr * lr_multiplier
    correct1 = 1.0 - state.beta1 ** state.t
    correct2 = 1.0 - state.beta2 ** state.t
    updated = []
    for k, (p, g) in enumerate(zip(params, grads)):
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        with np.errstate(over="ignore"):
            state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        # An overflowing second moment would silently freeze the parameter.
        if not np.all(np.isfinite(state.v[k])):
            raise NumericError("optimizer second moment overflowed")
        m_hat = state.m[k] / correct1
        v_hat = state.v[k] / correct2
        updated.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated
