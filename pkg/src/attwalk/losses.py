"""Training objectives. Each accepts one prediction vector with an int
label, or a (B, C) batch with a label array (the result is the batch mean)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .backbone import glorot
from .errors import LabelOutOfRange, SingleClass

LAMBDA_TCL = 1.0
LAMBDA_CE = 0.01
MARGIN = 1.0
BETA = 0.9


@dataclass
class ClassCenters:
    centers: Tensor  # (C, dim of the prediction vector)
    margin: float = MARGIN

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError("margin must be positive")

    @property
    def n_classes(self) -> int:
        return self.centers.shape[0]


def init_centers(n_classes: int, dim: int, rng: np.random.Generator, margin: float = MARGIN) -> ClassCenters:
    return ClassCenters(Tensor(glorot(rng, n_classes, dim), True), margin)


@dataclass
class ClassCounts:
    counts: np.ndarray  # training-set size per class
    beta: float = BETA

    def weight(self, label) -> np.ndarray:
        n = np.asarray(self.counts, dtype=np.float64)[np.asarray(label)]
        if np.any(n < 1):
            raise ValueError("class-balanced weight needs n_l >= 1")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        return (1.0 - self.beta) / (1.0 - self.beta ** n)


def _batch(p, labels):
    p = ad.as_tensor(p)
    single = p.ndim == 1
    if single:
        p = ad.reshape(p, (1, p.shape[0]))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    C = p.shape[1]
    if labels.shape != (p.shape[0],):
        raise ValueError(f"{len(labels)} labels for {p.shape[0]} predictions")
    if np.any(labels < 0) or np.any(labels >= C):
        raise LabelOutOfRange(f"labels {labels.tolist()} outside [0, {C})")
    return p, labels


def _onehot(labels: np.ndarray, C: int) -> np.ndarray:
    out = np.zeros((len(labels), C))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _mean(per_sample: Tensor) -> Tensor:
    return ad.scalar_mul(ad.sum_axis(per_sample), 1.0 / per_sample.shape[0])


def cross_entropy_terms(p, labels) -> Tensor:
    """Per-sample -log softmax(p)_l via a max-shifted log-sum-exp, shape (B,)."""
    p, labels = _batch(p, labels)
    B, C = p.shape
    shift = np.broadcast_to(p.data.max(axis=1, keepdims=True), (B, C))
    z = ad.sub(p, shift)
    lse = ad.log(ad.sum_axis(ad.exp(z), axis=1))
    picked = ad.sum_axis(ad.hadamard(z, _onehot(labels, C)), axis=1)
    return ad.sub(lse, picked)


def softmax_cross_entropy(p, labels) -> Tensor:
    return _mean(cross_entropy_terms(p, labels))


def squared_distances(p: Tensor, centers: Tensor) -> Tensor:
    """(B, K) squared Euclidean distances between rows of p and of centers."""
    B, dim = p.shape
    K = centers.shape[0]
    pp = ad.matmul(ad.hadamard(p, p), np.ones((dim, K)))
    cT = ad.transpose(centers)
    cc = ad.matmul(np.ones((B, dim)), ad.hadamard(cT, cT))
    cross = ad.scalar_mul(ad.matmul(p, cT), 2.0)
    return ad.sub(ad.add(pp, cc), cross)


def triplet_center_terms(p, labels, centers: ClassCenters) -> Tensor:
    p, labels = _batch(p, labels)
    K = centers.n_classes
    if K < 2:
        raise SingleClass("triplet-center loss needs at least two classes")
    if np.any(labels >= K):
        raise LabelOutOfRange(f"no center for labels {labels.tolist()}")
    D = squared_distances(p, centers.centers)
    own = _onehot(labels, K)
    others = np.where(own > 0, np.inf, D.data)
    nearest = np.argmin(others, axis=1)  # lowest index on ties
    d_pos = ad.sum_axis(ad.hadamard(D, own), axis=1)
    d_neg = ad.sum_axis(ad.hadamard(D, _onehot(nearest, K)), axis=1)
    return ad.relu(ad.add(ad.sub(d_pos, d_neg), centers.margin))


def triplet_center_loss(p, labels, centers: ClassCenters) -> Tensor:
    return _mean(triplet_center_terms(p, labels, centers))


def combined_retrieval_loss(p, labels, centers: ClassCenters, lambda1: float = LAMBDA_TCL,
                            lambda2: float = LAMBDA_CE) -> Tensor:
    tcl = triplet_center_loss(p, labels, centers)
    ce = softmax_cross_entropy(p, labels)
    return ad.add(ad.scalar_mul(tcl, lambda1), ad.scalar_mul(ce, lambda2))


def class_balanced_ce(p, labels, counts: ClassCounts) -> Tensor:
    terms = cross_entropy_terms(p, labels)
    w = counts.weight(np.atleast_1d(labels))
    return _mean(ad.hadamard(terms, w))
