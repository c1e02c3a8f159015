"""Central finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .tensor import Tensor, backward

Inputs = Union[Tensor, Sequence[Tensor]]


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    n_checked: int
    worst: tuple[int, int] = (-1, -1)  # (input index, flat coordinate)


def grad_check(f: Callable[..., Tensor], x: Inputs, h: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare backward() against central differences for every coordinate.

    ``f`` takes one tensor per entry of ``x`` and returns a scalar tensor.
    Relative error per coordinate is |g - g_fd| / max(1e-8, |g| + |g_fd|).
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    base = [np.array(t.data, dtype=np.float64) for t in xs]

    leaves = [Tensor(b.copy(), requires_grad=True) for b in base]
    grads = backward(f(*leaves))
    analytic = [grads[t].data if t in grads else np.zeros_like(t.data) for t in leaves]

    def value(arrays) -> float:
        return float(f(*[Tensor(a) for a in arrays]).data)

    worst, worst_at, count = 0.0, (-1, -1), 0
    for i, b in enumerate(base):
        flat = b.reshape(-1)
        for k in range(flat.size):
            probe = [a.copy() for a in base]
            p = probe[i].reshape(-1)
            p[k] = flat[k] + h
            up = value(probe)
            p[k] = flat[k] - h
            down = value(probe)
            numeric = (up - down) / (2 * h)
            g = analytic[i].reshape(-1)[k]
            err = abs(g - numeric) / max(1e-8, abs(g) + abs(numeric))
            count += 1
            if err > worst:
                worst, worst_at = err, (i, k)
    return GradCheckReport(worst, worst < tol, count, worst_at)
