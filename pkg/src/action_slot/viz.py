"""Attention thresholding and per-frame colored overlays."""
from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

__all__ = ["OverlaySpec", "threshold_attention", "class_colors", "upsample_nearest", "overlay_frames", "render_overlay"]


def threshold_attention(attention, tau: float = 0.2) -> np.ndarray:
    """``1`` where attention is strictly greater than ``tau``."""
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    a = np.asarray(attention, dtype=np.float64)
    if a.size and (a.min() < 0 or a.max() > 1):
        raise ValueError("attention values must lie in [0, 1]")
    return (a > tau).astype(np.uint8)


def class_colors(n: int) -> list[tuple[int, int, int]]:
    """``n`` distinct saturated colors evenly spaced in hue."""
    return [
        tuple(int(round(255 * c)) for c in colorsys.hsv_to_rgb(i / max(n, 1), 0.9, 1.0))
        for i in range(n)
    ]


def upsample_nearest(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    h, w = mask.shape[-2:]
    rows = (np.arange(height) * h) // height
    cols = (np.arange(width) * w) // width
    return mask[..., rows[:, None], cols[None, :]]


@dataclass
class OverlaySpec:
    classes: Union[str, Sequence[int]] = "auto"
    tau: float = 0.2
    alpha: float = 0.5
    colors: Optional[dict] = None
    pattern: str = "overlay_{:03d}.png"

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")

    def resolve(self, probs: Optional[np.ndarray], n_classes: int) -> list[int]:
        if isinstance(self.classes, str):
            if self.classes != "auto":
                raise ValueError(f"unknown class selection {self.classes!r}")
            if probs is None:
                raise ValueError("'auto' selection needs predicted probabilities")
            return [int(i) for i in np.flatnonzero(np.asarray(probs) > 0.5)]
        out = [int(i) for i in self.classes]
        for i in out:
            if not 0 <= i < n_classes:
                raise IndexError(f"class index {i} outside [0, {n_classes})")
        return out


def overlay_frames(frames, attention, class_indices, tau=0.2, alpha=0.5, colors=None) -> np.ndarray:
    """Composite thresholded per-class attention onto ``(T, H, W, 3)`` frames.

    ``attention`` is ``(T, h, w, n_slots)``; masks are upsampled by nearest
    neighbour. Pixels outside every mask are returned unchanged.
    """
    frames = np.asarray(frames)
    out = frames.astype(np.float64).copy()
    T, H, W, _ = frames.shape
    if attention.shape[0] != T:
        raise ValueError(f"attention has {attention.shape[0]} frames, clip has {T}")
    colors = colors or dict(zip(class_indices, class_colors(len(class_indices))))
    for c in class_indices:
        if not 0 <= c < attention.shape[-1]:
            raise IndexError(f"class index {c} outside the attention map")
        mask = upsample_nearest(threshold_attention(attention[..., c], tau), H, W).astype(bool)
        color = np.asarray(colors[c], dtype=np.float64)
        out[mask] = (1 - alpha) * out[mask] + alpha * color
    return np.clip(np.round(out), 0, 255).astype(frames.dtype)


def render_overlay(frames, attention, class_indices, labels: Sequence[str], out_dir, spec: OverlaySpec = OverlaySpec()):
    """Write one overlay PNG per frame plus ``legend.txt``; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    class_indices = list(class_indices)
    colors = spec.colors or dict(zip(class_indices, class_colors(len(class_indices))))
    if len(set(map(tuple, (colors[c] for c in class_indices)))) != len(class_indices):
        raise ValueError("overlay colors must be distinct per class")
    composite = overlay_frames(frames, attention, class_indices, spec.tau, spec.alpha, colors)
    paths = []
    for t, img in enumerate(composite):
        p = out / spec.pattern.format(t)
        Image.fromarray(img.astype(np.uint8)).save(p)
        paths.append(p)
    legend = "".join(f"{labels[c]}\t#{r:02x}{g:02x}{b:02x}\n" for c in class_indices for r, g, b in [colors[c]])
    (out / "legend.txt").write_text(legend)
    return paths
