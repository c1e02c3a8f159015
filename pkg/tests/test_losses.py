import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attwalk import autodiff as ad
from attwalk.autodiff import Tensor, backward, grad_check
from attwalk.errors import LabelOutOfRange, SingleClass
from attwalk.losses import (
    ClassCenters, ClassCounts, class_balanced_ce, combined_retrieval_loss, init_centers,
    softmax_cross_entropy, squared_distances, triplet_center_loss,
)


def hand_centers():
    # p = 0: D(p, c0) = 0.5, D(p, c1) = 1.0, D(p, c2) = 4.0
    return ClassCenters(Tensor([[0.5, 0.5], [1.0, 0.0], [0.0, 2.0]]), margin=1.0)


def test_ce_uniform_is_log_c():
    assert float(softmax_cross_entropy(np.zeros(4), 2).data) == pytest.approx(math.log(4), abs=1e-12)


def test_ce_confident_goes_to_zero():
    loss = float(softmax_cross_entropy(np.array([0.0, 50.0, 1.0]), 1).data)
    assert 0 <= loss < 1e-20


def test_ce_hand_value():
    expected = -math.log(math.exp(3) / (math.exp(1) + math.exp(2) + math.exp(3)))
    assert float(softmax_cross_entropy(np.array([1.0, 2.0, 3.0]), 2).data) == pytest.approx(0.40760596, abs=1e-8)
    assert float(softmax_cross_entropy(np.array([1.0, 2.0, 3.0]), 2).data) == pytest.approx(expected, abs=1e-15)


def test_ce_huge_logits_stable():
    assert np.isfinite(float(softmax_cross_entropy(np.array([1000.0, -1000.0, 0.0]), 1).data))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_ce_gradient_is_softmax_minus_onehot(seed, C):
    rng = np.random.default_rng(seed)
    p = Tensor(rng.normal(scale=3, size=C), requires_grad=True)
    label = int(rng.integers(C))
    g = backward(softmax_cross_entropy(p, label))[p].data
    expected = ad.softmax_numpy(p.data)
    expected[label] -= 1.0
    assert np.max(np.abs(g - expected)) < 1e-10


def test_ce_batch_is_mean():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(5, 3))
    labels = np.array([0, 2, 1, 1, 0])
    batch = float(softmax_cross_entropy(P, labels).data)
    assert batch == pytest.approx(np.mean([float(softmax_cross_entropy(P[i], labels[i]).data) for i in range(5)]),
                                  abs=1e-14)


@pytest.mark.parametrize("label", [-1, 4])
def test_label_out_of_range(label):
    with pytest.raises(LabelOutOfRange):
        softmax_cross_entropy(np.zeros(4), label)
    with pytest.raises(LabelOutOfRange):
        triplet_center_loss(np.zeros(2), label, hand_centers())


def test_tcl_hand_case():
    assert float(triplet_center_loss(np.zeros(2), 0, hand_centers()).data) == pytest.approx(0.5, abs=1e-12)


def test_tcl_hinge_inactive():
    c = ClassCenters(Tensor([[0.0, 0.0], [1.0, 0.0], [0.0, 3.0]]), 1.0)
    assert float(triplet_center_loss(np.zeros(2), 0, c).data) == 0.0
    # D(p, c_l) = 0.1, nearest other 5.0 -> clamped
    c = ClassCenters(Tensor([[0.1 ** 0.5, 0.0], [0.0, 5.0 ** 0.5]]), 1.0)
    assert float(triplet_center_loss(np.zeros(2), 0, c).data) == 0.0


def test_tcl_single_class():
    with pytest.raises(SingleClass):
        triplet_center_loss(np.zeros(2), 0, ClassCenters(Tensor([[0.0, 0.0]]), 1.0))


def test_tcl_tie_picks_lowest_index():
    # classes 1 and 2 equidistant from p; gradient must flow to center 1 only
    centers = Tensor([[0.2, 0.0], [1.0, 0.0], [-1.0, 0.0]], requires_grad=True)
    loss = triplet_center_loss(np.zeros(2), 0, ClassCenters(centers, 1.0))
    g = backward(loss)[centers].data
    assert np.any(g[1] != 0) and np.all(g[2] == 0)


def test_squared_distances_oracle():
    rng = np.random.default_rng(1)
    P, C = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    expected = ((P[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    assert np.allclose(squared_distances(Tensor(P), Tensor(C)).data, expected, atol=1e-12)


def test_combined_defaults_and_degenerate():
    p = np.zeros(3)
    centers = ClassCenters(Tensor([[0.5, 0.5, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]), 1.0)
    tcl = float(triplet_center_loss(p, 0, centers).data)
    ce = float(softmax_cross_entropy(p, 0).data)
    assert tcl == pytest.approx(0.5, abs=1e-12) and ce == pytest.approx(math.log(3), abs=1e-12)
    assert float(combined_retrieval_loss(p, 0, centers, 0.0, 0.7).data) == pytest.approx(0.7 * ce, abs=1e-15)
    assert float(combined_retrieval_loss(p, 0, centers, 1.3, 0.0).data) == pytest.approx(1.3 * tcl, abs=1e-15)
    # TCL = 0.5 with uniform C=4 logits (CE = ln 4) and the default weights
    p4 = np.zeros(4)
    c4 = ClassCenters(Tensor([[0.5, 0.5, 0, 0], [1.0, 0, 0, 0], [0, 2.0, 0, 0], [0, 0, 2.0, 0]]), 1.0)
    assert float(combined_retrieval_loss(p4, 0, c4).data) == pytest.approx(0.5 + 0.01 * math.log(4), abs=1e-12)
    assert 0.5 + 0.01 * math.log(4) == pytest.approx(0.51386294, abs=1e-8)


def test_class_balanced_weights():
    assert ClassCounts(np.array([1, 5]), 0.9).weight(0) == pytest.approx(1.0, abs=1e-15)
    w = ClassCounts(np.array([10]), 0.9).weight(0)
    assert w == pytest.approx(0.1 / (1 - 0.9 ** 10), abs=1e-12)
    assert w == pytest.approx(0.15354, abs=1e-5)
    assert np.all(ClassCounts(np.array([1, 7, 100]), 0.0).weight([0, 1, 2]) == 1.0)
    ws = ClassCounts(np.arange(1, 50), 0.9).weight(np.arange(49))
    assert np.all(np.diff(ws) < 0)


def test_class_balanced_ce_value():
    p = np.array([0.3, -1.0, 2.0])
    counts = ClassCounts(np.array([10, 3, 1]), 0.9)
    for label in range(3):
        expected = counts.weight(label) * float(softmax_cross_entropy(p, label).data)
        assert float(class_balanced_ce(p, label, counts).data) == pytest.approx(expected, abs=1e-14)
    assert float(class_balanced_ce(p, 2, counts).data) == float(softmax_cross_entropy(p, 2).data)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_losses_nonnegative(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(scale=4, size=(3, 4))
    labels = rng.integers(4, size=3)
    centers = init_centers(4, 4, rng)
    assert float(softmax_cross_entropy(P, labels).data) >= 0
    assert float(triplet_center_loss(P, labels, centers).data) >= 0
    assert float(combined_retrieval_loss(P, labels, centers).data) >= 0
    assert float(class_balanced_ce(P, labels, ClassCounts(rng.integers(1, 20, size=4))).data) >= 0


def test_ce_grad_check():
    rng = np.random.default_rng(2)
    rep = grad_check(lambda p: softmax_cross_entropy(p, np.array([1, 0, 2])), Tensor(rng.normal(size=(3, 4))))
    assert rep.passed, rep


def test_class_balanced_grad_check():
    rng = np.random.default_rng(3)
    counts = ClassCounts(np.array([3, 10, 40, 1]))
    rep = grad_check(lambda p: class_balanced_ce(p, np.array([1, 3, 2]), counts), Tensor(rng.normal(size=(3, 4))))
    assert rep.passed, rep


def _tcl_point(rng):
    """A (p, centers) pair with the hinge active and no argmin tie."""
    while True:
        P = rng.normal(size=(3, 4))
        C = rng.normal(size=(4, 4))
        labels = np.array([0, 1, 2])
        D = ((P[:, None] - C[None]) ** 2).sum(-1)
        own = D[np.arange(3), labels]
        other = np.where(np.eye(4)[labels] > 0, np.inf, D)
        srt = np.sort(other, axis=1)
        if np.all(own + 1.0 - srt[:, 0] > 0.05) and np.all(srt[:, 1] - srt[:, 0] > 0.05):
            return P, C, labels


def test_tcl_grad_check_p_and_centers():
    P, C, labels = _tcl_point(np.random.default_rng(4))
    rep = grad_check(lambda p, c: triplet_center_loss(p, labels, ClassCenters(c, 1.0)), [Tensor(P), Tensor(C)])
    assert rep.passed, rep


def test_combined_grad_check():
    P, C, labels = _tcl_point(np.random.default_rng(5))
    rep = grad_check(lambda p, c: combined_retrieval_loss(p, labels, ClassCenters(c, 1.0)), [Tensor(P), Tensor(C)])
    assert rep.passed, rep


def test_margin_must_be_positive():
    with pytest.raises(ValueError):
        ClassCenters(Tensor(np.zeros((2, 2))), 0.0)
