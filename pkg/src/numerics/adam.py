"""Adam optimizer over named parameter arrays."""
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from src.errors import ShapeError


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> 'AdamState':
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.step,
                         {k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()})


def adam_step(state: AdamState, params: Mapping[str, np.ndarray],
              grads: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """
    One bias-corrected Adam update.

    Moments in `state` are advanced in place; parameters missing from
    `grads` are treated as having zero gradient.

    Returns:
        New parameter arrays keyed like `params`
    """
    state.step += 1
    t = state.step
    updated = {}
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        if grad.shape != value.shape:
            raise ShapeError("adam_step", value.shape, grad.shape)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(value)
            v = np.zeros_like(value)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        updated[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Dict[str, np.ndarray]:
    """Scale all gradients so their joint L2 norm is at most max_norm"""
    total = global_norm(grads)
    if max_norm <= 0 or total <= max_norm:
        return dict(grads)
    factor = max_norm / (total + 1e-12)
    return {k: g * factor for k, g in grads.items()}


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
