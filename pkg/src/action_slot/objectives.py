"""Classification, background-attention and negative-class attention losses.

All log arguments are clamped to ``[EPS, 1 - EPS]``. Leading batch
dimensions are averaged; per-sample reductions follow each function's
docstring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

__all__ = [
    "EPS",
    "LossWeights",
    "loss_act",
    "loss_bg",
    "loss_neg",
    "loss_ego",
    "loss_total",
    "background_target",
]

EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    w_bg: float = 0.5
    w_neg: float = 1.0
    w_ego: float = 1.0

    def __post_init__(self):
        for name in ("w_bg", "w_neg", "w_ego"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def _t(x, like=None):
    if isinstance(x, torch.Tensor):
        return x
    dtype = like.dtype if isinstance(like, torch.Tensor) else torch.float64
    return torch.as_tensor(x, dtype=dtype)


def _bce(p, y):
    p = p.clamp(EPS, 1 - EPS)
    return -(y * torch.log(p) + (1 - y) * torch.log1p(-p))


def loss_act(probs, labels) -> torch.Tensor:
    """Sum over classes of binary cross-entropy."""
    probs = _t(probs)
    labels = _t(labels, probs).to(probs.dtype)
    if probs.shape != labels.shape:
        raise ValueError(f"probs {tuple(probs.shape)} vs labels {tuple(labels.shape)}")
    return _bce(probs, labels).sum(-1).mean()


def loss_bg(attention_bg, target) -> torch.Tensor:
    """Mean over tokens of BCE between background-slot attention and the mask."""
    a = _t(attention_bg)
    m = _t(target, a).to(a.dtype)
    if a.shape != m.shape:
        raise ValueError(f"attention {tuple(a.shape)} vs target {tuple(m.shape)}")
    return _bce(a, m).mean(-1).mean()


def loss_neg(attention, labels) -> torch.Tensor:
    """Sum over negative classes of mean-over-tokens BCE against an all-zero mask.

    ``attention`` is ``(..., N, K)`` holding action-slot columns only.
    """
    a = _t(attention)
    y = _t(labels, a).to(a.dtype)
    if a.shape[-1] != y.shape[-1]:
        raise ValueError(f"attention has {a.shape[-1]} slots, labels {y.shape[-1]} classes")
    per_class = -torch.log1p(-a.clamp(EPS, 1 - EPS)).mean(-2)
    return (per_class * (1 - y)).sum(-1).mean()


def loss_ego(ego_probs, ego_label) -> torch.Tensor:
    p = _t(ego_probs)
    idx = torch.as_tensor(ego_label, dtype=torch.long).reshape(-1, 1)
    return -torch.log(p.reshape(idx.shape[0], -1).gather(1, idx).clamp_min(EPS)).mean()


def loss_total(
    probs,
    labels,
    attention=None,
    bg_target=None,
    weights: LossWeights = LossWeights(),
    ego_probs=None,
    ego_label=None,
    background: bool = True,
):
    """Weighted objective and its components.

    ``attention`` is the normalized ``(..., N, S)`` map; when ``background``
    is set its last column is the background slot. Components that are
    disabled (zero weight, no background slot, no ego head) contribute 0.
    Returns ``(total, breakdown)`` with float breakdown values.
    """
    if not isinstance(weights, LossWeights):
        weights = LossWeights(*weights)
    l_act = loss_act(probs, labels)
    zero = l_act.new_zeros(())
    l_bg = l_neg = l_ego = zero
    if attention is not None:
        attention = _t(attention)
        K = _t(labels).shape[-1]
        if background and weights.w_bg > 0:
            if bg_target is None:
                raise ValueError("background loss enabled but no background target given")
            l_bg = loss_bg(attention[..., K], bg_target)
        if weights.w_neg > 0:
            l_neg = loss_neg(attention[..., :K], labels)
    if ego_probs is not None and ego_label is not None and weights.w_ego > 0:
        l_ego = loss_ego(ego_probs, ego_label)
    total = l_act + weights.w_bg * l_bg + weights.w_neg * l_neg + weights.w_ego * l_ego
    breakdown = {
        "L_act": l_act.item(),
        "L_bg": l_bg.item(),
        "L_neg": l_neg.item(),
        "ego": l_ego.item(),
        "total": total.item(),
    }
    return total, breakdown


def background_target(masks, grid: tuple[int, int]) -> torch.Tensor:
    """Reduce ``(B, T, H, W)`` image masks to ``(B, T*h*w)`` token targets.

    Area-average each ``H/h x W/w`` cell, then threshold at 0.5.
    """
    m = _t(masks).float()
    B, T, H, W = m.shape
    h, w = grid
    if H % h or W % w:
        raise ValueError(f"mask {H}x{W} does not tile into a {h}x{w} grid")
    pooled = F.avg_pool2d(m.reshape(B * T, 1, H, W), kernel_size=(H // h, W // w))
    return (pooled >= 0.5).float().reshape(B, T * h * w)
