"""Cross-walk attention: fuse n walk features (columns of a d x n matrix)
into one mesh descriptor, plus the pooling baselines it is compared with."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .backbone import glorot
from .errors import ShapeMismatch

AGGREGATORS = ("attention", "avg_pool", "max_pool", "ha_avg_pool", "ha_max_pool")


@dataclass
class AttentionParams:
    W_q: Tensor
    W_k: Tensor
    W_v: Tensor

    @property
    def d(self) -> int:
        return self.W_q.shape[0]

    def named(self) -> dict[str, Tensor]:
        return {"attn.W_q": self.W_q, "attn.W_k": self.W_k, "attn.W_v": self.W_v}

    @classmethod
    def from_named(cls, tensors: dict, requires_grad: bool = True) -> "AttentionParams":
        return cls(*(Tensor(np.asarray(tensors[f"attn.{k}"]), requires_grad) for k in ("W_q", "W_k", "W_v")))

    @classmethod
    def zeros(cls, d: int, requires_grad: bool = True) -> "AttentionParams":
        return cls(*(Tensor(np.zeros((d, d)), requires_grad) for _ in range(3)))


def init_attention(d: int, rng: np.random.Generator) -> AttentionParams:
    """Glorot query/key projections and a zero value projection.

    With W_v = 0 the block starts out as exact average pooling, while the
    query/key weights still receive gradient once W_v moves.
    """
    return AttentionParams(
        Tensor(glorot(rng, d, d), True),
        Tensor(glorot(rng, d, d), True),
        Tensor(np.zeros((d, d)), True),
    )


@dataclass
class AttentionResult:
    f_a: Tensor  # (d,)
    weights: Tensor  # (d, n), row-stochastic softmax(H_a)
    H_a: Tensor  # (d, n)
    walk_contributions: np.ndarray  # (n,)


def _check(F_w: Tensor, params: AttentionParams) -> None:
    if F_w.ndim != 2 or F_w.shape[1] < 1:
        raise ShapeMismatch(f"walk feature matrix must be d x n with n >= 1, got {F_w.shape}")
    d = F_w.shape[0]
    for W in (params.W_q, params.W_k, params.W_v):
        if W.shape != (d, d):
            raise ShapeMismatch(f"attention weight {W.shape} does not match d={d}")


def self_attention_features(F_w, params: AttentionParams) -> Tensor:
    """H_a = softmax_rows(Q K^T / sqrt(d)) V with Q, K, V = W F_w."""
    F_w = ad.as_tensor(F_w)
    _check(F_w, params)
    d = F_w.shape[0]
    Q = params.W_q @ F_w
    K = params.W_k @ F_w
    V = params.W_v @ F_w
    W_sa = ad.row_softmax(ad.scalar_mul(Q @ ad.transpose(K), 1.0 / np.sqrt(d)))
    return W_sa @ V


def cross_walk_attention(F_w, params: AttentionParams) -> AttentionResult:
    F_w = ad.as_tensor(F_w)
    H_a = self_attention_features(F_w, params)
    weights = ad.row_softmax(H_a)
    f_a = ad.sum_axis(ad.hadamard(F_w, weights), axis=1)
    contributions = weights.data.mean(axis=0)
    return AttentionResult(f_a, weights, H_a, contributions)


def rank_walks(result: AttentionResult) -> list[int]:
    """Walk indices from most to least attentive; ties keep index order."""
    c = np.asarray(result.walk_contributions)
    return sorted(range(len(c)), key=lambda j: (-c[j], j))


def aggregate_baseline(F_w, mode: str, params: AttentionParams | None = None) -> Tensor:
    F_w = ad.as_tensor(F_w)
    if F_w.ndim != 2:
        raise ShapeMismatch(f"walk feature matrix must be d x n, got {F_w.shape}")
    if mode == "avg_pool":
        # weight-then-sum, the same arithmetic as uniform attention weights
        n = F_w.shape[1]
        return ad.sum_axis(ad.hadamard(F_w, np.full(F_w.shape, 1.0 / n)), axis=1)
    if mode == "max_pool":
        return ad.max_axis(F_w, axis=1)
    if mode in ("ha_avg_pool", "ha_max_pool"):
        if params is None:
            raise ValueError(f"{mode} needs attention parameters")
        H_a = self_attention_features(F_w, params)
        return ad.mean_axis(H_a, axis=1) if mode == "ha_avg_pool" else ad.max_axis(H_a, axis=1)
    raise ValueError(f"unknown aggregation mode {mode!r}")


def aggregate(F_w, mode: str, params: AttentionParams | None = None) -> Tensor:
    """Mesh descriptor for any aggregation mode, including "attention"."""
    if mode == "attention":
        return cross_walk_attention(F_w, params).f_a
    return aggregate_baseline(F_w, mode, params)
