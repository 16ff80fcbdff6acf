"""Action-slot network in PyTorch.

Token order everywhere is ``(t, h, w)`` row-major: token ``n`` of a
``T' x H' x W'`` feature volume is ``n = (t * H' + h) * W' + w``.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import torch
from torch import nn

__all__ = ["Backbone", "SlotAttention", "SlotClassifier", "EgoHead", "ActionSlotNet"]


class Backbone(nn.Module):
    """Per-frame conv stack with shared weights; time is never downsampled."""

    def __init__(self, channels: Sequence[int] = (32, 64, 128, 256), strides=(2, 2, 2, 1), dropout=0.5):
        super().__init__()
        if len(channels) != len(strides):
            raise ValueError("channels and strides must have the same length")
        layers, cin = [], 3
        for c, s in zip(channels, strides):
            layers += [nn.Conv2d(cin, c, 3, stride=s, padding=1, bias=False), nn.BatchNorm2d(c), nn.ReLU(inplace=True)]
            cin = c
        self.net = nn.Sequential(*layers).to(memory_format=torch.channels_last)
        self.dropout = nn.Dropout(dropout)
        self.out_channels = cin
        self.factor = math.prod(strides)

    def output_grid(self, height: int, width: int) -> tuple[int, int]:
        if height % self.factor or width % self.factor:
            raise ValueError(
                f"frame size {height}x{width} is not divisible by the downsample factor {self.factor}"
            )
        return height // self.factor, width // self.factor

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """``(B, T, H, W, 3)`` in [0, 1] -> ``(B, T, H', W', C)``."""
        B, T, H, W, _ = frames.shape
        self.output_grid(H, W)
        x = frames.reshape(B * T, H, W, 3).permute(0, 3, 1, 2)
        x = self.dropout(self.net(x))
        _, C, h, w = x.shape
        return x.permute(0, 2, 3, 1).reshape(B, T, h, w, C)


class SlotAttention(nn.Module):
    """Slot attention over a fixed bank of learnable slots.

    ``normalize="slot"`` applies the softmax across slots for every token, so
    slots compete for tokens; ``"cross"`` applies it across tokens for every
    slot (plain cross-attention). Without ``gru`` the slots are replaced by
    the update ``U = A_norm^T v(tokens)``.
    """

    def __init__(
        self,
        n_slots: int,
        in_dim: int,
        slot_dim: int = 256,
        n_iter: int = 1,
        normalize: str = "slot",
        gru: bool = False,
    ):
        super().__init__()
        if n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if normalize not in ("slot", "cross"):
            raise ValueError(f"unknown normalization {normalize!r}")
        self.n_slots = n_slots
        self.slot_dim = slot_dim
        self.n_iter = n_iter
        self.normalize = normalize
        self.scale = slot_dim ** -0.5
        self.slots = nn.Parameter(torch.randn(n_slots, slot_dim) * slot_dim ** -0.5)
        self.norm_inputs = nn.LayerNorm(in_dim)
        self.norm_slots = nn.LayerNorm(slot_dim)
        self.to_q = nn.Linear(slot_dim, slot_dim)
        self.to_k = nn.Linear(in_dim, slot_dim)
        self.to_v = nn.Linear(in_dim, slot_dim)
        self.gru = nn.GRUCell(slot_dim, slot_dim) if gru else None

    def _project(self, tokens):
        x = self.norm_inputs(tokens)
        return self.to_k(x), self.to_v(x)

    def step(self, k, v, slots):
        """One update; returns ``(new_slots, normalized_attention, raw_attention)``."""
        q = self.to_q(self.norm_slots(slots))
        raw = torch.einsum("bnd,bsd->bns", k, q) * self.scale
        # float64 normalization keeps sums within 1e-6 of 1 even over thousands of tokens
        attn = raw.double().softmax(dim=-1 if self.normalize == "slot" else -2).to(raw.dtype)
        updates = torch.einsum("bns,bnd->bsd", attn, v)
        if self.gru is not None:
            B, S, D = updates.shape
            updates = self.gru(updates.reshape(B * S, D), slots.reshape(B * S, D)).reshape(B, S, D)
        return updates, attn, raw

    def initial_slots(self, batch: int) -> torch.Tensor:
        return self.slots.unsqueeze(0).expand(batch, -1, -1)

    def parallel(self, tokens: torch.Tensor, slots: Optional[torch.Tensor] = None):
        """All ``N = T'H'W'`` tokens jointly, ``n_iter`` times; final attention returned."""
        k, v = self._project(tokens)
        slots = self.initial_slots(tokens.shape[0]) if slots is None else slots
        for _ in range(self.n_iter):
            slots, attn, raw = self.step(k, v, slots)
        return slots, attn, raw

    def recurrent(self, tokens: torch.Tensor, n_frames: int, slots: Optional[torch.Tensor] = None):
        """One update per frame in temporal order, each seeing only its frame."""
        B, N, _ = tokens.shape
        if N % n_frames:
            raise ValueError(f"{N} tokens do not split into {n_frames} frames")
        k, v = self._project(tokens)
        per = N // n_frames
        slots = self.initial_slots(B) if slots is None else slots
        attns, raws = [], []
        for t in range(n_frames):
            sl = slice(t * per, (t + 1) * per)
            slots, attn, raw = self.step(k[:, sl], v[:, sl], slots)
            attns.append(attn)
            raws.append(raw)
        return slots, torch.cat(attns, 1), torch.cat(raws, 1)


class SlotClassifier(nn.Module):
    """Independent logistic classifier per action slot; extra slots are ignored."""

    def __init__(self, n_classes: int, slot_dim: int):
        super().__init__()
        self.n_classes = n_classes
        self.weight = nn.Parameter(torch.randn(n_classes, slot_dim) * 1e-3)
        self.bias = nn.Parameter(torch.zeros(n_classes))

    def logits(self, slots: torch.Tensor) -> torch.Tensor:
        return (slots[:, : self.n_classes] * self.weight).sum(-1) + self.bias

    def forward(self, slots: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(slots))


class EgoHead(nn.Module):
    def __init__(self, in_dim: int, hidden: int = 256, n_actions: int = 4):
        super().__init__()
        self.proj = nn.Conv3d(in_dim, hidden, kernel_size=1)
        self.fc = nn.Linear(hidden, n_actions)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """``(B, T, H, W, C)`` features -> ``(B, n_actions)`` probabilities."""
        x = self.proj(features.permute(0, 4, 1, 2, 3))
        return self.fc(x.mean(dim=(2, 3, 4))).softmax(-1)


class ActionSlotNet(nn.Module):
    """Backbone + 3D positional embedding + allocated slots + classifiers.

    Slot ``i < n_classes`` is bound to class ``i``; with ``background`` an
    extra last slot competes for tokens but has no classifier.
    """

    def __init__(
        self,
        n_classes: int,
        clip_length: int = 16,
        frame_size: tuple[int, int] = (64, 192),
        backbone_channels: Sequence[int] = (32, 64, 128, 256),
        backbone_strides: Sequence[int] = (2, 2, 2, 1),
        slot_dim: int = 256,
        n_iter: int = 1,
        update: str = "parallel",
        background: bool = True,
        attention: str = "slot",
        gru: bool = False,
        ego_head: bool = True,
        dropout: float = 0.5,
    ):
        super().__init__()
        if update not in ("parallel", "recurrent"):
            raise ValueError(f"unknown update mode {update!r}")
        self.n_classes = n_classes
        self.clip_length = clip_length
        self.update = update
        self.background = background
        self.backbone = Backbone(backbone_channels, backbone_strides, dropout)
        h, w = self.backbone.output_grid(*frame_size)
        self.grid = (clip_length, h, w)
        d_in = self.backbone.out_channels
        self.pos_embedding = nn.Parameter(torch.randn(clip_length, h, w, d_in) * 0.02)
        self.slot_attention = SlotAttention(
            n_classes + int(background), d_in, slot_dim, n_iter, attention, gru
        )
        self.classifier = SlotClassifier(n_classes, slot_dim)
        self.ego_head = EgoHead(d_in) if ego_head else None

    def extract_features(self, frames: torch.Tensor) -> torch.Tensor:
        return self.backbone(frames)

    def forward(self, frames: torch.Tensor) -> dict:
        """``frames``: ``(B, T, H, W, 3)`` float in [0, 1]."""
        if frames.shape[1] != self.clip_length:
            raise ValueError(f"expected {self.clip_length} frames, got {frames.shape[1]}")
        feats = self.extract_features(frames)
        if tuple(feats.shape[1:4]) != self.grid:
            raise ValueError(f"feature grid {tuple(feats.shape[1:4])} != {self.grid}")
        B, T, h, w, C = feats.shape
        tokens = (feats + self.pos_embedding).reshape(B, T * h * w, C)
        if self.update == "parallel":
            slots, attn, raw = self.slot_attention.parallel(tokens)
        else:
            slots, attn, raw = self.slot_attention.recurrent(tokens, T)
        logits = self.classifier.logits(slots)
        return {
            "logits": logits,
            "probs": torch.sigmoid(logits),
            "attention": attn,
            "raw_attention": raw,
            "slots": slots,
            "ego_probs": self.ego_head(feats) if self.ego_head is not None else None,
            "features": feats,
        }
