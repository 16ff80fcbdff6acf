"""scikit-learn style estimator around :class:`~action_slot.model.ActionSlotNet`."""
from __future__ import annotations

import copy
import json
import logging
import math
import time
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .activity import EGO_ACTIONS, ClassCatalog, enumerate_classes
from .dataset import ClipDataset
from .metrics import EvalReport, mean_average_precision
from .model import ActionSlotNet
from .objectives import LossWeights, background_target, loss_total
from .scenario import subsample_indices
from .validation import check_ego_labels, check_multihot, check_videos

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "action-slot-checkpoint"
CHECKPOINT_VERSION = 1

__all__ = ["ActionSlotClassifier", "save_checkpoint", "load_checkpoint", "CheckpointError"]


class CheckpointError(ValueError):
    pass


class ActionSlotClassifier(ClassifierMixin, BaseEstimator):
    """Multi-label atomic-activity classifier with one allocated slot per class.

    Parameters
    ----------
    catalog : sequence of str, optional
        Canonical labels, one per output column. Defaults to the dataset's
        catalog when fitting on a :class:`ClipDataset`, else the 64-class one.
    clip_length : int
        Frames fed to the network; longer videos are subsampled at a uniform
        stride (random start while training, fixed start otherwise).
    update : {"parallel", "recurrent"}
    background_slot : bool
    attention : {"slot", "cross"}
        Softmax across slots (slot attention) or across tokens.
    w_bg, w_neg, w_ego : float
        Loss weights; zero disables the term.
    validation_fraction : float
        Share of training clips held out to pick the best epoch by mAP.
    max_train_time : float, optional
        Wall-clock budget in seconds, checked between epochs.
    """

    def __init__(
        self,
        catalog=None,
        clip_length=16,
        backbone_channels=(32, 64, 128, 256),
        slot_dim=256,
        n_iter=1,
        update="parallel",
        background_slot=True,
        attention="slot",
        gru=False,
        ego_head=True,
        w_bg=0.5,
        w_neg=1.0,
        w_ego=1.0,
        dropout=0.5,
        epochs=100,
        batch_size=8,
        learning_rate=1e-4,
        weight_decay=1e-2,
        validation_fraction=0.1,
        random_state=0,
        max_train_time=None,
        log_path=None,
        eval_batch_size=8,
        verbose=0,
    ):
        self.catalog = catalog
        self.clip_length = clip_length
        self.backbone_channels = backbone_channels
        self.slot_dim = slot_dim
        self.n_iter = n_iter
        self.update = update
        self.background_slot = background_slot
        self.attention = attention
        self.gru = gru
        self.ego_head = ego_head
        self.w_bg = w_bg
        self.w_neg = w_neg
        self.w_ego = w_ego
        self.dropout = dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.max_train_time = max_train_time
        self.log_path = log_path
        self.eval_batch_size = eval_batch_size
        self.verbose = verbose

    # ------------------------------------------------------------ setup

    def _resolve_catalog(self, X, n_classes):
        if self.catalog is not None:
            return ClassCatalog.from_labels(self.catalog)
        if isinstance(X, ClipDataset):
            return X.catalog
        full = enumerate_classes()
        if n_classes not in (None, len(full)):
            raise ValueError(f"labels have {n_classes} columns; pass catalog= to name them")
        return full

    def _build(self, frame_size):
        return ActionSlotNet(
            n_classes=len(self.catalog_),
            clip_length=self.clip_length,
            frame_size=tuple(frame_size),
            backbone_channels=tuple(self.backbone_channels),
            slot_dim=self.slot_dim,
            n_iter=self.n_iter,
            update=self.update,
            background=self.background_slot,
            attention=self.attention,
            gru=self.gru,
            ego_head=self.ego_head,
            dropout=self.dropout,
        )

    def _weights(self):
        return LossWeights(
            self.w_bg if self.background_slot else 0.0,
            self.w_neg,
            self.w_ego if self.ego_head else 0.0,
        )

    def _batch(self, src, idx, mode, rng, y=None, ego=None):
        frames, masks = [], []
        for i in idx:
            ind = subsample_indices(src.n_frames, self.clip_length, mode, rng)
            f, m = src.get(int(i), ind)
            frames.append(f)
            masks.append(m)
        out = {"frames": torch.from_numpy(np.stack(frames))}
        if masks[0] is not None:
            out["masks"] = torch.from_numpy(np.stack(masks).astype(np.float32))
        if y is not None:
            out["labels"] = torch.from_numpy(y[idx])
        if ego is not None:
            out["ego"] = torch.from_numpy(ego[idx])
        return out

    # ------------------------------------------------------------ fit

    def fit(self, X, y=None, *, bg_masks=None, ego=None):
        """Train on videos ``(n, frames, H, W, 3)`` or a :class:`ClipDataset`.

        ``bg_masks`` (``(n, frames, H, W)``, 1 = background) are required when
        the background loss is active; a dataset supplies its own masks,
        labels and ego labels.
        """
        src = check_videos(X, bg_masks, self.clip_length)
        if y is None:
            if not isinstance(X, ClipDataset):
                raise ValueError("y is required unless X is a ClipDataset")
            y = X.labels
        if ego is None and isinstance(X, ClipDataset):
            ego = X.ego_labels
        y = check_multihot(y, len(src))
        self.catalog_ = self._resolve_catalog(X, y.shape[1])
        check_multihot(y, len(src), len(self.catalog_))
        if ego is not None:
            ego = check_ego_labels(ego, len(src), len(EGO_ACTIONS))
        weights = self._weights()
        if weights.w_bg > 0 and not src.has_masks:
            raise ValueError("background loss enabled but no background masks given")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")

        self.classes_ = np.array(self.catalog_.labels)
        self.frame_size_ = tuple(int(v) for v in src.frame_size)
        rng = np.random.default_rng(self.random_state)
        order = rng.permutation(len(src))
        n_val = int(round(self.validation_fraction * len(src)))
        val_idx, train_idx = np.sort(order[:n_val]), order[n_val:]
        self.validation_indices_ = val_idx

        log = open(self.log_path, "w") if self.log_path else None
        try:
            with torch.random.fork_rng(devices=[]):
                torch.manual_seed(self.random_state)
                self._fit_loop(src, y, ego, weights, train_idx, val_idx, rng, log)
        finally:
            if log:
                log.close()
        return self

    def _fit_loop(self, src, y, ego, weights, train_idx, val_idx, rng, log):
        net = self._build(self.frame_size_)
        self.net_ = net
        opt = torch.optim.AdamW(net.parameters(), lr=self.learning_rate, weight_decay=self.weight_decay)
        grid = net.grid[1:]
        self.history_ = []
        best, best_state = -math.inf, None
        t0 = time.monotonic()
        step = 0
        self.stopped_early_ = False
        for epoch in range(self.epochs):
            net.train()
            perm = rng.permutation(train_idx)
            losses = []
            for b in range(0, len(perm), self.batch_size):
                batch = self._batch(src, perm[b : b + self.batch_size], "random", rng, y, ego)
                out = net(batch["frames"])
                bg = background_target(batch["masks"], grid) if "masks" in batch else None
                total, parts = loss_total(
                    out["probs"],
                    batch["labels"],
                    out["attention"],
                    bg,
                    weights,
                    out["ego_probs"],
                    batch.get("ego"),
                    background=self.background_slot,
                )
                if not torch.isfinite(total):
                    raise FloatingPointError(f"non-finite loss at epoch {epoch} step {step}: {parts}")
                opt.zero_grad()
                total.backward()
                opt.step()
                losses.append(parts["total"])
                if log:
                    log.write(json.dumps({"kind": "step", "step": step, "epoch": epoch, **parts}) + "\n")
                step += 1
            record = {"kind": "epoch", "epoch": epoch, "train_loss": float(np.mean(losses))}
            if len(val_idx):
                proba = self._predict(src, val_idx)["probs"]
                rep = mean_average_precision(proba, y[val_idx], self.catalog_)
                record["val_map"] = None if math.isnan(rep.map) else rep.map
                score = -record["train_loss"] if record["val_map"] is None else rep.map
                if score > best:
                    best, best_state = score, copy.deepcopy(net.state_dict())
                    self.best_epoch_ = epoch
            record["elapsed"] = time.monotonic() - t0
            self.history_.append(record)
            if log:
                log.write(json.dumps(record) + "\n")
                log.flush()
            if self.verbose:
                logger.info("epoch %d loss %.4f val_map %s", epoch, record["train_loss"], record.get("val_map"))
            if self.max_train_time is not None and record["elapsed"] > self.max_train_time:
                self.stopped_early_ = True
                break
        if best_state is not None:
            net.load_state_dict(best_state)
        else:
            self.best_epoch_ = len(self.history_) - 1
        net.eval()
        self.n_epochs_ = len(self.history_)

    # ------------------------------------------------------------ inference

    @torch.no_grad()
    def _predict(self, src, idx=None, keys=("probs",)):
        net = self.net_
        was_training = net.training
        net.eval()
        idx = np.arange(len(src)) if idx is None else np.asarray(idx)
        out = {k: [] for k in keys}
        try:
            for b in range(0, len(idx), self.eval_batch_size):
                batch = self._batch(src, idx[b : b + self.eval_batch_size], "fixed", None)
                res = net(batch["frames"])
                for k in keys:
                    out[k].append(res[k].numpy())
        finally:
            net.train(was_training)
        return {k: np.concatenate(v) for k, v in out.items()}

    def _source(self, X):
        check_is_fitted(self, "net_")
        src = check_videos(X, None, self.clip_length)
        if tuple(src.frame_size) != self.frame_size_:
            raise ValueError(f"frame size {tuple(src.frame_size)} != fitted {self.frame_size_}")
        return src

    def predict_proba(self, X) -> np.ndarray:
        """Per-class probabilities ``(n, n_classes)``."""
        return self._predict(self._source(X))["probs"]

    def decision_function(self, X) -> np.ndarray:
        return self._predict(self._source(X), keys=("logits",))["logits"]

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) > threshold).astype(np.int64)

    def predict_ego(self, X) -> np.ndarray:
        if not self.ego_head:
            raise AttributeError("ego head disabled")
        return self._predict(self._source(X), keys=("ego_probs",))["ego_probs"]

    def transform(self, X) -> np.ndarray:
        """Action-slot representations flattened to ``(n, n_classes * slot_dim)``."""
        slots = self._predict(self._source(X), keys=("slots",))["slots"]
        return slots[:, : len(self.catalog_)].reshape(len(slots), -1)

    def attention_maps(self, X) -> np.ndarray:
        """Normalized attention reshaped to ``(n, T', H', W', n_slots)``."""
        att = self._predict(self._source(X), keys=("attention",))["attention"]
        return att.reshape(len(att), *self.net_.grid, att.shape[-1])

    def evaluate(self, X, y=None, ego=None) -> EvalReport:
        src = self._source(X)
        if y is None:
            y = X.labels
            ego = X.ego_labels if ego is None else ego
        keys = ("probs", "ego_probs") if self.ego_head else ("probs",)
        res = self._predict(src, keys=keys)
        report = mean_average_precision(res["probs"], check_multihot(y, len(src), len(self.catalog_)), self.catalog_)
        if self.ego_head and ego is not None:
            report.ego_accuracy = float((res["ego_probs"].argmax(1) == np.asarray(ego)).mean())
        return report

    def score(self, X, y=None, sample_weight=None) -> float:
        """Mean average precision."""
        return self.evaluate(X, y).map

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.multi_output = True
        tags.target_tags.single_output = False
        tags.non_deterministic = False
        return tags


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(est: ActionSlotClassifier, path, seed: Optional[int] = None) -> None:
    check_is_fitted(est, "net_")
    params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in est.get_params().items()}
    params["log_path"] = None
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "params": params,
        "catalog": est.catalog_.labels,
        "catalog_hash": est.catalog_.digest(),
        "frame_size": list(est.frame_size_),
        "seed": est.random_state if seed is None else seed,
        "best_epoch": getattr(est, "best_epoch_", None),
        "history": est.history_,
        "state_dict": est.net_.state_dict(),
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(blob, tmp)
    tmp.replace(path)


def load_checkpoint(path) -> ActionSlotClassifier:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not an action-slot checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {blob.get('version')}")
    params = dict(blob["params"])
    params["backbone_channels"] = tuple(params["backbone_channels"])
    params["catalog"] = list(blob["catalog"])
    est = ActionSlotClassifier(**params)
    est.catalog_ = ClassCatalog.from_labels(blob["catalog"])
    if est.catalog_.digest() != blob["catalog_hash"]:
        raise CheckpointError("catalog hash mismatch inside checkpoint")
    est.classes_ = np.array(est.catalog_.labels)
    est.frame_size_ = tuple(blob["frame_size"])
    est.history_ = blob["history"]
    est.best_epoch_ = blob["best_epoch"]
    est.net_ = est._build(est.frame_size_)
    est.net_.load_state_dict(blob["state_dict"])
    est.net_.eval()
    return est
