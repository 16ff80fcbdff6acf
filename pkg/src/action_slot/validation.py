"""Input checks shared by the estimator and the training harness."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .dataset import ClipDataset

__all__ = ["VideoSource", "check_videos", "check_multihot", "check_ego_labels"]


class VideoSource:
    """Uniform access to videos held in memory or in a :class:`ClipDataset`."""

    def __init__(self, videos=None, masks=None, dataset: Optional[ClipDataset] = None):
        self.videos = videos
        self.masks = masks
        self.dataset = dataset

    def __len__(self):
        return len(self.dataset) if self.dataset is not None else len(self.videos)

    @property
    def n_frames(self) -> int:
        if self.dataset is not None:
            return self.dataset.n_frames
        return self.videos.shape[1]

    @property
    def frame_size(self) -> tuple[int, int]:
        if self.dataset is not None:
            frames, _ = self.dataset[0].load([0])
            return frames.shape[1:3]
        return tuple(self.videos.shape[2:4])

    @property
    def has_masks(self) -> bool:
        return self.dataset is not None or self.masks is not None

    def get(self, i: int, indices: Sequence[int]):
        """``(frames float32 (T,H,W,3) in [0,1], masks uint8 (T,H,W) or None)``."""
        if self.dataset is not None:
            frames, masks = self.dataset[i].load(indices)
        else:
            frames = self.videos[i][np.asarray(indices)]
            masks = None if self.masks is None else self.masks[i][np.asarray(indices)]
        if frames.dtype == np.uint8:
            frames = frames.astype(np.float32) / 255.0
        return frames.astype(np.float32, copy=False), masks


def check_videos(X, bg_masks=None, min_frames: int = 1) -> VideoSource:
    if isinstance(X, ClipDataset):
        src = VideoSource(dataset=X)
    else:
        X = np.asarray(X)
        if X.ndim != 5 or X.shape[-1] != 3:
            raise ValueError(f"expected videos of shape (n, frames, H, W, 3), got {X.shape}")
        if X.dtype != np.uint8:
            X = X.astype(np.float32)
            if not np.isfinite(X).all():
                raise ValueError("videos contain non-finite values")
            if X.min() < 0 or X.max() > 1:
                raise ValueError("float videos must lie in [0, 1]")
        if bg_masks is not None:
            bg_masks = np.asarray(bg_masks)
            if bg_masks.shape != X.shape[:4]:
                raise ValueError(f"background masks {bg_masks.shape} do not match videos {X.shape[:4]}")
            if not np.isin(bg_masks, (0, 1)).all():
                raise ValueError("background masks must be binary")
        src = VideoSource(X, bg_masks)
    if len(src) == 0:
        raise ValueError("no videos given")
    if src.n_frames < min_frames:
        raise ValueError(f"videos have {src.n_frames} frames, need at least {min_frames}")
    return src


def check_multihot(y, n_samples: int, n_classes: Optional[int] = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[0] != n_samples:
        raise ValueError(f"expected labels of shape ({n_samples}, n_classes), got {y.shape}")
    if n_classes is not None and y.shape[1] != n_classes:
        raise ValueError(f"labels have {y.shape[1]} classes, expected {n_classes}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be multi-hot (0/1)")
    return y.astype(np.float32)


def check_ego_labels(ego, n_samples: int, n_actions: int = 4) -> np.ndarray:
    ego = np.asarray(ego).astype(np.int64).ravel()
    if ego.shape[0] != n_samples:
        raise ValueError(f"{ego.shape[0]} ego labels for {n_samples} samples")
    if ego.min() < 0 or ego.max() >= n_actions:
        raise ValueError(f"ego labels must lie in [0, {n_actions})")
    return ego
