"""Walk encoder: two FC(ReLU) embedding layers, three stacked GRUs, and the
shared classification head."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .autodiff.ops import sigmoid_numpy
from .errors import EmptySequence, ShapeMismatch
from .walks import WalkFeatureSequence

DESK_DIMS = (32, 64, 64, 64, 128)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class GRUParams:
    """Gate-stacked weights, column blocks ordered (update z, reset r, candidate)."""

    W: Tensor  # (in, 3h)
    U: Tensor  # (h, 3h)
    b: Tensor  # (3h,)

    @property
    def hidden(self) -> int:
        return self.U.shape[0]


@dataclass
class BackboneParams:
    fc: list  # [(W, b), (W, b)] with W of shape (in, out)
    gru: list  # three GRUParams
    head_W: Tensor  # (C, d)
    head_b: Tensor  # (C,)
    dims: tuple = DESK_DIMS
    frozen: bool = False

    @property
    def d(self) -> int:
        return self.dims[-1]

    @property
    def n_classes(self) -> int:
        return self.head_W.shape[0]

    def named(self) -> dict[str, Tensor]:
        out = {}
        for i, (W, b) in enumerate(self.fc):
            out[f"fc{i}.W"], out[f"fc{i}.b"] = W, b
        for i, g in enumerate(self.gru):
            out[f"gru{i}.W"], out[f"gru{i}.U"], out[f"gru{i}.b"] = g.W, g.U, g.b
        out["head.W"], out["head.b"] = self.head_W, self.head_b
        return out

    def encoder_names(self) -> list[str]:
        return [k for k in self.named() if not k.startswith("head.")]

    @classmethod
    def from_named(cls, tensors: dict, dims, frozen: bool = False, head_grad: bool = True) -> "BackboneParams":
        enc = not frozen

        def t(name, grad):
            return Tensor(np.asarray(tensors[name], dtype=np.float64), requires_grad=grad)

        return cls(
            fc=[(t(f"fc{i}.W", enc), t(f"fc{i}.b", enc)) for i in range(2)],
            gru=[GRUParams(t(f"gru{i}.W", enc), t(f"gru{i}.U", enc), t(f"gru{i}.b", enc)) for i in range(3)],
            head_W=t("head.W", head_grad),
            head_b=t("head.b", head_grad),
            dims=tuple(dims),
            frozen=frozen,
        )

    @classmethod
    def wrap(cls, tensors: dict[str, Tensor], dims) -> "BackboneParams":
        """Assemble from existing tensors (shared, not copied)."""
        return cls(
            fc=[(tensors[f"fc{i}.W"], tensors[f"fc{i}.b"]) for i in range(2)],
            gru=[GRUParams(tensors[f"gru{i}.W"], tensors[f"gru{i}.U"], tensors[f"gru{i}.b"]) for i in range(3)],
            head_W=tensors["head.W"],
            head_b=tensors["head.b"],
            dims=tuple(dims),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.named().items()}

    def freeze(self, head: bool = False) -> "BackboneParams":
        """Copy whose encoder tensors do not require grad (and the head, if asked)."""
        return BackboneParams.from_named(self.arrays(), self.dims, frozen=True, head_grad=not head)


def init_params(dims: Sequence[int], n_classes: int, rng: np.random.Generator) -> BackboneParams:
    """Glorot-uniform weights and zero biases. ``dims`` = (h1, h2, g1, g2, d)."""
    dims = tuple(int(x) for x in dims)
    if len(dims) != 5 or min(dims) < 1 or n_classes < 1:
        raise ValueError(f"bad backbone dims {dims} / classes {n_classes}")
    h1, h2, g1, g2, d = dims
    fc = []
    for fan_in, fan_out in ((3, h1), (h1, h2)):
        fc.append((Tensor(glorot(rng, fan_in, fan_out), True), Tensor(np.zeros(fan_out), True)))
    gru = []
    for n_in, n_h in ((h2, g1), (g1, g2), (g2, d)):
        W = np.concatenate([glorot(rng, n_in, n_h) for _ in range(3)], axis=1)
        U = np.concatenate([glorot(rng, n_h, n_h) for _ in range(3)], axis=1)
        gru.append(GRUParams(Tensor(W, True), Tensor(U, True), Tensor(np.zeros(3 * n_h), True)))
    head_W = Tensor(glorot(rng, d, n_classes).T.copy(), True)
    return BackboneParams(fc, gru, head_W, Tensor(np.zeros(n_classes), True), dims)


def _gate(t: Tensor, k: int, h: int) -> Tensor:
    return ad.take(t, np.arange(k * h, (k + 1) * h), axis=t.ndim - 1)


def gru_cell(x, h, p: GRUParams) -> Tensor:
    """One GRU step built from elementary ops; x is (in,) or (B, in)."""
    x, h = ad.as_tensor(x), ad.as_tensor(h)
    n = p.hidden
    if x.shape[-1] != p.W.shape[0] or h.shape[-1] != n:
        raise ShapeMismatch(f"gru_cell: x {x.shape}, h {h.shape} vs W {p.W.shape}, U {p.U.shape}")
    Wz, Wr, Wc = (_gate(p.W, k, n) for k in range(3))
    Uz, Ur, Uc = (_gate(p.U, k, n) for k in range(3))
    bz, br, bc = (_gate(p.b, k, n) for k in range(3))
    z = ad.sigmoid(x @ Wz + h @ Uz + bz)
    r = ad.sigmoid(x @ Wr + h @ Ur + br)
    cand = ad.tanh(x @ Wc + (r * h) @ Uc + bc)
    return (1.0 - z) * h + z * cand


def gru_sequence(xs, p: GRUParams) -> Tensor:
    """Run a GRU over a (T, B, in) sequence from a zero state; returns (T, B, h).

    Fused forward/backward (backprop through time) recorded as one node.
    Numerically it is the same recurrence as ``gru_cell``.
    """
    xs = ad.as_tensor(xs)
    if xs.ndim != 3 or xs.shape[2] != p.W.shape[0]:
        raise ShapeMismatch(f"gru_sequence: input {xs.shape} vs W {p.W.shape}")
    ad.tensor.check_finite(xs, p.W, p.U, p.b)
    T, B, n_in = xs.shape
    n = p.hidden
    W, U, b = p.W.data, p.U.data, p.b.data
    U_zr, U_c = U[:, : 2 * n], U[:, 2 * n:]
    x_flat = xs.data.reshape(T * B, n_in)
    pre = (x_flat @ W + b).reshape(T, B, 3 * n)

    H = np.empty((T + 1, B, n))  # H[0] is the initial state
    H[0] = 0.0
    Z = np.empty((T, B, n))
    R = np.empty((T, B, n))
    C = np.empty((T, B, n))
    h = H[0]
    for s in range(T):
        a = pre[s]
        zr = sigmoid_numpy(a[:, : 2 * n] + h @ U_zr)
        z, r = zr[:, :n], zr[:, n:]
        c = np.tanh(a[:, 2 * n:] + (r * h) @ U_c)
        h = h + z * (c - h)
        Z[s], R[s], C[s], H[s + 1] = z, r, c, h

    def vjp(g):
        d_pre = np.empty((T, B, 3 * n))
        dh = np.zeros((B, n))
        for s in range(T - 1, -1, -1):
            h_prev, z, r, c = H[s], Z[s], R[s], C[s]
            dh = dh + g[s]
            d_c = dh * z * (1.0 - c * c)
            d_z = dh * (c - h_prev) * z * (1.0 - z)
            d_rh = d_c @ U_c.T
            d_r = d_rh * h_prev * r * (1.0 - r)
            d_pre[s, :, :n] = d_z
            d_pre[s, :, n:2 * n] = d_r
            d_pre[s, :, 2 * n:] = d_c
            dh = dh * (1.0 - z) + d_rh * r + d_pre[s, :, : 2 * n] @ U_zr.T
        flat = d_pre.reshape(T * B, 3 * n)
        h_prev_flat = H[:-1].reshape(T * B, n)
        rh_flat = (R * H[:-1]).reshape(T * B, n)
        dU = np.concatenate([h_prev_flat.T @ flat[:, : 2 * n], rh_flat.T @ flat[:, 2 * n:]], axis=1)
        return (flat @ W.T).reshape(T, B, n_in), x_flat.T @ flat, dU, flat.sum(axis=0)

    return Tensor._from_op(H[1:].copy(), "gru_sequence", (xs, p.W, p.U, p.b), vjp)


def encode_batch(deltas: np.ndarray, params: BackboneParams) -> Tensor:
    """Walk features (B, d) for a batch of equal-length delta sequences (B, T, 3)."""
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.ndim != 3 or deltas.shape[2] != 3:
        raise ShapeMismatch(f"expected (B, T, 3) deltas, got {deltas.shape}")
    B, T, _ = deltas.shape
    if T < 1:
        raise EmptySequence("walk has no steps")
    x = Tensor(deltas.transpose(1, 0, 2).reshape(T * B, 3))
    (W1, b1), (W2, b2) = params.fc
    x = ad.relu(x @ W1 + b1)
    x = ad.relu(x @ W2 + b2)
    seq = ad.reshape(x, (T, B, W2.shape[1]))
    for layer in params.gru:
        seq = gru_sequence(seq, layer)
    return ad.take(seq, T - 1, axis=0)


def walk_forward(seq: WalkFeatureSequence | np.ndarray, params: BackboneParams) -> Tensor:
    """Feature vector f_w (d,) of one walk: last state of the top GRU."""
    deltas = seq.deltas if isinstance(seq, WalkFeatureSequence) else np.asarray(seq)
    if len(deltas) == 0:
        raise EmptySequence("walk has no steps")
    return ad.reshape(encode_batch(deltas[None], params), (params.d,))


def classify(feature, params: BackboneParams) -> Tensor:
    """Logits W f + b for a (d,) feature or a (B, d) batch."""
    feature = ad.as_tensor(feature)
    if feature.shape[-1] != params.head_W.shape[1]:
        raise ShapeMismatch(f"classify: feature {feature.shape} vs head {params.head_W.shape}")
    return feature @ ad.transpose(params.head_W) + params.head_b
