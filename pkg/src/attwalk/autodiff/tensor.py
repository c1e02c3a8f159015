"""Dense float64 tensors with a reverse-mode gradient record.

Every tensor that requires grad gets a node id from a global counter, so
the ids are a topological order of the recorded graph by construction.
An op output keeps references to its inputs and a vector-Jacobian product
closure. ``backward`` collects the nodes reachable from the loss and
replays them in decreasing id order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import NonFinite, NotScalar

_node_ids = itertools.count()

Vjp = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(frozen=True)
class Node:
    op: str
    inputs: tuple["Tensor", ...]
    vjp: Vjp


class Tensor:
    __slots__ = ("data", "requires_grad", "node_id", "node")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.node_id: Optional[int] = next(_node_ids) if requires_grad else None
        self.node: Optional[Node] = None

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _from_op(cls, data: np.ndarray, op: str, inputs: tuple["Tensor", ...], vjp: Vjp) -> "Tensor":
        needs = any(t.requires_grad for t in inputs)
        out = cls(data, requires_grad=needs)
        if needs:
            out.node = Node(op, inputs, vjp)
        return out

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operator sugar (defined in ops) ----------------------------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        if np.isscalar(other):
            return ops.scalar_mul(self, other)
        return ops.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        from . import ops
        if not np.isscalar(other):
            raise TypeError("only division by a scalar is supported")
        return ops.scalar_mul(self, 1.0 / other)

    def __neg__(self):
        from . import ops
        return ops.scalar_mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    @property
    def T(self):
        from . import ops
        return ops.transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def check_finite(*tensors: Tensor) -> None:
    for t in tensors:
        if not np.isfinite(t.data).all():
            raise NonFinite("tensor contains NaN or Inf")


class Gradients(dict):
    """Mapping node_id -> gradient Tensor; also indexable by the tensor."""

    def __getitem__(self, key):
        if isinstance(key, Tensor):
            key = key.node_id
        return super().__getitem__(key)

    def get(self, key, default=None):
        if isinstance(key, Tensor):
            key = key.node_id
        return super().get(key, default)

    def __contains__(self, key) -> bool:
        if isinstance(key, Tensor):
            key = key.node_id
        return super().__contains__(key)


def backward(loss: Tensor) -> Gradients:
    """Gradients of a scalar ``loss`` w.r.t. every reachable requires-grad tensor."""
    if loss.data.size != 1:
        raise NotScalar(f"loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return Gradients()

    nodes: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if t.node_id in nodes:
            continue
        nodes[t.node_id] = t
        if t.node is not None:
            stack.extend(x for x in t.node.inputs if x.requires_grad and x.node_id not in nodes)

    grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    for nid in sorted(nodes, reverse=True):
        t = nodes[nid]
        g = grads.get(nid)
        if g is None or t.node is None:
            continue
        for x, gx in zip(t.node.inputs, t.node.vjp(g)):
            if gx is None or not x.requires_grad:
                continue
            prev = grads.get(x.node_id)
            grads[x.node_id] = gx if prev is None else prev + gx
    return Gradients((k, Tensor(v)) for k, v in grads.items())
