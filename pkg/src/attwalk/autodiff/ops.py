"""Differentiable operations.

Elementwise binary ops accept equal shapes or a bias-style operand whose
shape is a trailing suffix of the other's (e.g. (n,) against (m, n)).
Any other combination is a ShapeMismatch.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, as_tensor, check_finite


def _unary(x: Tensor, op: str) -> Tensor:
    x = as_tensor(x)
    check_finite(x)
    return x


def _bias_shapes(a: Tensor, b: Tensor, op: str) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    short, long_ = (sa, sb) if len(sa) < len(sb) else (sb, sa)
    if len(short) == len(long_) or long_[len(long_) - len(short):] != short:
        raise ShapeMismatch(f"{op}: shapes {sa} and {sb} are not bias-broadcastable")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    return g.sum(axis=tuple(range(lead)))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bias_shapes(a, b, "add")
    check_finite(a, b)
    sa, sb = a.shape, b.shape
    return Tensor._from_op(a.data + b.data, "add", (a, b), lambda g: (_reduce_to(g, sa), _reduce_to(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bias_shapes(a, b, "sub")
    check_finite(a, b)
    sa, sb = a.shape, b.shape
    return Tensor._from_op(a.data - b.data, "sub", (a, b), lambda g: (_reduce_to(g, sa), -_reduce_to(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bias_shapes(a, b, "mul")
    check_finite(a, b)
    ad, bd = a.data, b.data
    sa, sb = a.shape, b.shape
    return Tensor._from_op(ad * bd, "mul", (a, b), lambda g: (_reduce_to(g * bd, sa), _reduce_to(g * ad, sb)))


def hadamard(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"hadamard: shapes {a.shape} and {b.shape} differ")
    return mul(a, b)


def scalar_mul(a, c: float) -> Tensor:
    a = _unary(a, "scalar_mul")
    c = float(c)
    return Tensor._from_op(a.data * c, "scalar_mul", (a,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    """Matrix product for 1-D/2-D operands (numpy semantics)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    check_finite(a, b)
    ad, bd = a.data, b.data

    def vjp(g):
        a2 = ad.reshape(1, -1) if ad.ndim == 1 else ad
        b2 = bd.reshape(-1, 1) if bd.ndim == 1 else bd
        g2 = g.reshape(a2.shape[0], b2.shape[1])
        return (g2 @ b2.T).reshape(ad.shape), (a2.T @ g2).reshape(bd.shape)

    return Tensor._from_op(ad @ bd, "matmul", (a, b), vjp)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeMismatch(f"transpose expects a matrix, got shape {a.shape}")
    return Tensor._from_op(a.data.T, "transpose", (a,), lambda g: (g.T,))


def sum_axis(a, axis=None) -> Tensor:
    """Sum over ``axis`` (None sums everything to a scalar)."""
    a = as_tensor(a)
    shape = a.shape
    if axis is None:
        return Tensor._from_op(np.asarray(a.data.sum()), "sum", (a,), lambda g: (np.broadcast_to(g, shape).copy(),))
    if not -a.ndim <= axis < a.ndim:
        raise ShapeMismatch(f"sum_axis: axis {axis} out of range for shape {shape}")
    return Tensor._from_op(
        a.data.sum(axis=axis), "sum_axis", (a,),
        lambda g: (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),),
    )


def mean_axis(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return scalar_mul(sum_axis(a, axis), 1.0 / n)


def max_axis(a, axis: int) -> Tensor:
    """Max over ``axis``; the subgradient goes to the first maximal entry."""
    a = _unary(a, "max_axis")
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)
    shape = a.shape

    def vjp(g):
        ga = np.zeros(shape)
        np.put_along_axis(ga, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (ga,)

    return Tensor._from_op(out, "max_axis", (a,), vjp)


def softmax_numpy(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def row_softmax(a) -> Tensor:
    """Softmax over the last axis, max-shifted for stability."""
    a = _unary(a, "row_softmax")
    s = softmax_numpy(a.data)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return Tensor._from_op(s, "row_softmax", (a,), vjp)


def sigmoid_numpy(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    a = _unary(a, "sigmoid")
    s = sigmoid_numpy(a.data)
    return Tensor._from_op(s, "sigmoid", (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Tensor:
    a = _unary(a, "tanh")
    t = np.tanh(a.data)
    return Tensor._from_op(t, "tanh", (a,), lambda g: (g * (1.0 - t * t),))


def relu(a) -> Tensor:
    a = _unary(a, "relu")
    mask = a.data > 0
    return Tensor._from_op(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = _unary(a, "exp")
    e = np.exp(a.data)
    return Tensor._from_op(e, "exp", (a,), lambda g: (g * e,))


def log(a) -> Tensor:
    a = _unary(a, "log")
    d = a.data
    return Tensor._from_op(np.log(d), "log", (a,), lambda g: (g / d,))


def concat(a, b, axis: int = 0) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != b.ndim or a.ndim == 0:
        raise ShapeMismatch(f"concat: ranks {a.ndim} and {b.ndim}")
    ax = axis % a.ndim
    if a.shape[:ax] + a.shape[ax + 1:] != b.shape[:ax] + b.shape[ax + 1:]:
        raise ShapeMismatch(f"concat: shapes {a.shape} and {b.shape} along axis {axis}")
    check_finite(a, b)
    na = a.shape[ax]

    def vjp(g):
        return np.take(g, np.arange(na), axis=ax), np.take(g, np.arange(na, g.shape[ax]), axis=ax)

    return Tensor._from_op(np.concatenate([a.data, b.data], axis=ax), "concat", (a, b), vjp)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    if not ts or any(t.shape != ts[0].shape for t in ts):
        raise ShapeMismatch("stack: tensors must share one shape")
    data = np.stack([t.data for t in ts], axis=axis)

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(ts)))

    return Tensor._from_op(data, "stack", ts, vjp)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f"reshape: cannot reshape {old} to {shape}") from None
    return Tensor._from_op(data, "reshape", (a,), lambda g: (g.reshape(old),))


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather entries along ``axis``; repeated indices accumulate gradient."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    shape = a.shape

    def vjp(g):
        ga = np.zeros(shape)
        moved = np.moveaxis(ga, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0) if idx.ndim else g)
        return (ga,)

    return Tensor._from_op(np.take(a.data, idx, axis=axis), "take", (a,), vjp)
