import math

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from action_slot.objectives import (
    EPS,
    LossWeights,
    background_target,
    loss_act,
    loss_bg,
    loss_ego,
    loss_neg,
    loss_total,
)
from oracles import bce

probs01 = st.floats(0.0, 1.0, allow_nan=False)


def test_loss_act_examples():
    assert loss_act([0.5], [1]).item() == pytest.approx(math.log(2), abs=1e-6)
    assert loss_act([0.9, 0.2], [1, 0]).item() == pytest.approx(bce(0.9, 1) + bce(0.2, 0), abs=1e-6)
    assert loss_act([0.9, 0.2], [1, 0]).item() == pytest.approx(0.328504, abs=1e-6)
    perfect = loss_act([1.0, 0.0, 1.0], [1, 0, 1]).item()
    assert perfect == pytest.approx(-3 * math.log(1 - EPS), rel=1e-6) and perfect < 1e-5


def test_loss_act_is_a_sum_over_classes():
    one = loss_act([0.3], [1]).item()
    assert loss_act([0.3] * 5, [1] * 5).item() == pytest.approx(5 * one, rel=1e-12)
    with pytest.raises(ValueError):
        loss_act([0.3, 0.2], [1])


def test_loss_bg_examples():
    assert loss_bg([0.5] * 7, [1] * 7).item() == pytest.approx(math.log(2), abs=1e-6)
    assert loss_bg([0.8, 0.1], [1, 0]).item() == pytest.approx((bce(0.8, 1) + bce(0.1, 0)) / 2, abs=1e-6)
    assert loss_bg([0.8, 0.1], [1, 0]).item() == pytest.approx(0.164252, abs=1e-6)
    assert loss_bg([1 - EPS, EPS, EPS], [1, 0, 0]).item() < 1e-5
    with pytest.raises(ValueError):
        loss_bg([0.5, 0.5], [1])


def test_loss_neg_examples():
    att = np.array([[0.5, 0.3], [0.2, 0.4]])  # N=2 tokens, 2 classes
    assert loss_neg(att, [0, 1]).item() == pytest.approx((bce(0.5, 0) + bce(0.2, 0)) / 2, abs=1e-6)
    assert loss_neg(att, [0, 1]).item() == pytest.approx(0.458145, abs=1e-6)
    assert loss_neg(att, [1, 1]).item() == 0.0
    assert loss_neg(np.zeros((4, 1)), [0]).item() < 1e-6


def test_loss_total_composition():
    rng = np.random.default_rng(0)
    att = rng.dirichlet(np.ones(4), size=6)  # 6 tokens, 3 classes + background
    probs, labels, target = [0.7, 0.1, 0.4], [1, 0, 0], [1, 0, 1, 0, 0, 1]
    total, parts = loss_total(probs, labels, att, target, LossWeights(0.5, 1.0))
    assert parts["L_act"] == pytest.approx(loss_act(probs, labels).item())
    assert parts["L_bg"] == pytest.approx(loss_bg(att[:, 3], target).item())
    assert parts["L_neg"] == pytest.approx(loss_neg(att[:, :3], labels).item())
    assert total.item() == pytest.approx(parts["L_act"] + 0.5 * parts["L_bg"] + parts["L_neg"], rel=1e-12)
    assert set(parts) == {"L_act", "L_bg", "L_neg", "ego", "total"}


def test_loss_total_weight_examples():
    rng = np.random.default_rng(1)
    att = rng.dirichlet(np.ones(3), size=5)
    total, _ = loss_total([0.6, 0.3], [1, 0], att, [0, 1, 0, 1, 1], LossWeights(0.0, 0.0))
    assert total.item() == pytest.approx(loss_act([0.6, 0.3], [1, 0]).item(), rel=1e-12)
    a, _ = loss_total([0.6, 0.3], [1, 1], att, [0, 1, 0, 1, 1], LossWeights(0.5, 0.0))
    b, _ = loss_total([0.6, 0.3], [1, 1], att, [0, 1, 0, 1, 1], LossWeights(0.5, 7.0))
    assert a.item() == b.item()
    # 0.6 + 0.5 * 0.4 + 1.0 * 0.2
    w = LossWeights()
    assert 0.6 + w.w_bg * 0.4 + w.w_neg * 0.2 == pytest.approx(1.0)


def test_loss_total_without_background_slot():
    att = np.full((4, 2), 0.5)
    total, parts = loss_total([0.6, 0.3], [1, 0], att, None, LossWeights(0.5, 1.0), background=False)
    assert parts["L_bg"] == 0.0 and parts["L_neg"] > 0
    with pytest.raises(ValueError):
        loss_total([0.6, 0.3], [1, 0], np.full((4, 3), 1 / 3), None, LossWeights(0.5, 1.0))


def test_ego_loss():
    p = torch.tensor([[0.1, 0.6, 0.2, 0.1]])
    assert loss_ego(p, [1]).item() == pytest.approx(-math.log(0.6), rel=1e-6)
    _, parts = loss_total([0.5], [1], ego_probs=p, ego_label=[1])
    assert parts["ego"] == pytest.approx(-math.log(0.6), rel=1e-6)
    _, parts = loss_total([0.5], [1], weights=LossWeights(w_ego=0.0), ego_probs=p, ego_label=[1])
    assert parts["ego"] == 0.0


@pytest.mark.parametrize("bad", [(-0.1, 1.0), (0.5, -1.0), (float("nan"), 1.0), (0.5, float("inf"))])
def test_weights_validated(bad):
    with pytest.raises(ValueError):
        LossWeights(*bad)


def test_clamp_safety():
    att = np.array([[0.0, 1.0], [1.0, 0.0]])
    for v in (loss_act([0.0, 1.0], [1, 0]), loss_bg([0.0, 1.0], [1, 0]), loss_neg(att, [0, 0])):
        assert math.isfinite(v.item())


@given(st.lists(probs01, min_size=1, max_size=8), st.lists(st.integers(0, 1), min_size=8, max_size=8))
def test_nonnegative(p, y):
    y = y[: len(p)]
    assert loss_act(p, y).item() >= 0
    assert loss_bg(p, y).item() >= 0
    assert loss_neg(np.array(p)[:, None], [0]).item() >= 0


@given(st.lists(probs01, min_size=2, max_size=6), st.integers(0, 5), st.floats(0.0, 1.0))
def test_neg_monotone(col, i, bump):
    i %= len(col)
    a = np.array(col)[:, None]
    b = a.copy()
    b[i, 0] = min(1.0, a[i, 0] + bump)
    assert loss_neg(b, [0]).item() >= loss_neg(a, [0]).item()


def test_bg_loss_reaches_action_columns_through_softmax():
    logits = torch.randn(5, 3, dtype=torch.float64, requires_grad=True)
    att = logits.softmax(-1)
    loss_bg(att[:, 2], torch.tensor([1.0, 0, 1, 0, 1], dtype=torch.float64)).backward()
    g_analytic = logits.grad[:, 0].clone()
    h = 1e-6
    fd = []
    for n in range(5):
        lp, lm = logits.detach().clone(), logits.detach().clone()
        lp[n, 0] += h
        lm[n, 0] -= h
        f = lambda z: loss_bg(z.softmax(-1)[:, 2], torch.tensor([1.0, 0, 1, 0, 1], dtype=torch.float64)).item()
        fd.append((f(lp) - f(lm)) / (2 * h))
    assert np.allclose(g_analytic.numpy(), fd, atol=1e-7)
    assert np.abs(fd).max() > 1e-3


def test_background_target():
    m = np.zeros((1, 2, 4, 4))
    m[0, 0, :2, :2] = 1  # full cell
    m[0, 0, 2, 2] = m[0, 0, 2, 3] = 1  # half cell counts
    m[0, 1, 0, 0] = 1  # quarter cell does not
    t = background_target(m, (2, 2))
    assert t.tolist() == [[1, 0, 0, 1, 0, 0, 0, 0]]
    with pytest.raises(ValueError):
        background_target(np.zeros((1, 1, 5, 4)), (2, 2))
