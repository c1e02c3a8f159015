"""Adam with bias correction and a triangular cyclic learning rate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Gradients, Tensor
from .errors import ShapeMismatch

LR_MAX = 5e-4
LR_MIN = 1e-6


def cyclic_lr(step: int, cycle_len: int, lr_max: float = LR_MAX, lr_min: float = LR_MIN,
              halved: bool = False) -> float:
    """Triangular wave: lr_max at the cycle start, lr_min at mid-cycle."""
    if cycle_len <= 0:
        raise ValueError("cycle_len must be positive")
    if halved:
        lr_max, lr_min = 0.5 * lr_max, 0.5 * lr_min
    phase = (step % cycle_len) / cycle_len
    frac = 2.0 * phase if phase < 0.5 else 2.0 * (1.0 - phase)
    return lr_max + (lr_min - lr_max) * frac


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params: dict[str, Tensor], grads: Gradients, state: AdamState, lr: float) -> AdamState:
    """One Adam step over ``params`` (name -> leaf Tensor).

    Parameter data is replaced, never written in place, so snapshots taken
    before the step stay valid. Parameters without a gradient count as a
    zero gradient.
    """
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads.get(p)
        g = np.zeros_like(p.data) if g is None else g.data
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - b1) * g if m is None else b1 * m + (1 - b1) * g
        v = (1 - b2) * g * g if v is None else b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
