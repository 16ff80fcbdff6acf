"""Training and evaluation harness over on-disk datasets."""
from __future__ import annotations

import dataclasses
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
import yaml

from .dataset import ClipDataset, load_manifest
from .estimator import ActionSlotClassifier, load_checkpoint, save_checkpoint
from .metrics import EvalReport

logger = logging.getLogger(__name__)

__all__ = ["TrainConfig", "ABLATIONS", "train_model", "evaluate", "load_config_file", "deterministic_mode"]

# Variant flags per ablation configuration; "full" is the complete model.
ABLATIONS = {
    "recurrent": dict(update="recurrent", background_slot=False, w_bg=0.0, w_neg=0.0),
    "allocated": dict(update="parallel", background_slot=False, w_bg=0.0, w_neg=0.0),
    "bg_slot": dict(update="parallel", background_slot=True, w_bg=0.0, w_neg=0.0),
    "bg_guided": dict(update="parallel", background_slot=True, w_bg=0.5, w_neg=0.0),
    "neg_reg": dict(update="parallel", background_slot=False, w_bg=0.0, w_neg=1.0),
    "full": dict(update="parallel", background_slot=True, w_bg=0.5, w_neg=1.0),
    "cross": dict(update="parallel", background_slot=True, w_bg=0.5, w_neg=1.0, attention="cross"),
}

LR_RANGE = (5e-5, 1e-4)
DECAY_RANGE = (1e-4, 1e-1)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    seed: int = 0
    clip_length: int = 16
    update: str = "parallel"
    background_slot: bool = True
    attention: str = "slot"
    n_iter: int = 1
    gru: bool = False
    ego_head: bool = True
    w_bg: float = 0.5
    w_neg: float = 1.0
    w_ego: float = 1.0
    backbone_channels: tuple = (32, 64, 128, 256)
    slot_dim: int = 256
    dropout: float = 0.5
    validation_fraction: float = 0.1
    max_train_time: Optional[float] = None
    variant: Optional[str] = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.variant is not None:
            if self.variant not in ABLATIONS:
                raise ValueError(f"unknown variant {self.variant!r}; choose from {sorted(ABLATIONS)}")
            for k, v in ABLATIONS[self.variant].items():
                setattr(self, k, v)
        self.backbone_channels = tuple(self.backbone_channels)
        if not LR_RANGE[0] <= self.learning_rate <= LR_RANGE[1]:
            logger.warning("learning rate %g outside the usual range %s", self.learning_rate, LR_RANGE)
        if not DECAY_RANGE[0] <= self.weight_decay <= DECAY_RANGE[1]:
            logger.warning("weight decay %g outside the usual range %s", self.weight_decay, DECAY_RANGE)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["backbone_channels"] = list(self.backbone_channels)
        return d

    def estimator(self, **overrides) -> ActionSlotClassifier:
        params = dict(
            clip_length=self.clip_length,
            backbone_channels=self.backbone_channels,
            slot_dim=self.slot_dim,
            n_iter=self.n_iter,
            update=self.update,
            background_slot=self.background_slot,
            attention=self.attention,
            gru=self.gru,
            ego_head=self.ego_head,
            w_bg=self.w_bg,
            w_neg=self.w_neg,
            w_ego=self.w_ego,
            dropout=self.dropout,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            validation_fraction=self.validation_fraction,
            random_state=self.seed,
            max_train_time=self.max_train_time,
        )
        params.update(overrides)
        return ActionSlotClassifier(**params)


@contextmanager
def deterministic_mode(threads: int = 1):
    """Single-threaded torch with deterministic kernels; restores settings on exit."""
    prev_threads = torch.get_num_threads()
    prev_det = torch.are_deterministic_algorithms_enabled()
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(True)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(prev_det)
        torch.set_num_threads(prev_threads)


def load_config_file(path) -> dict:
    """Read a YAML or JSON mapping."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path} does not contain a mapping")
    return data


def train_model(config: TrainConfig, data_dir, out_dir, split: str = "train"):
    """Fit on ``split`` of the dataset; write ``checkpoint.pt`` and ``train_log.jsonl``.

    The checkpoint holds the weights from the epoch with the best
    validation mAP. Returns ``(checkpoint_path, estimator)``.
    """
    data = ClipDataset(data_dir, split)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=1, sort_keys=True))
    est = config.estimator(log_path=str(out / "train_log.jsonl"))
    est.fit(data)
    ckpt = out / "checkpoint.pt"
    save_checkpoint(est, ckpt, seed=config.seed)
    logger.info("trained %d epochs (best %d), checkpoint %s", est.n_epochs_, est.best_epoch_, ckpt)
    return ckpt, est


def evaluate(checkpoint, data_dir, split: str = "test", report_path=None, estimator=None) -> EvalReport:
    """Score a checkpoint on a split with fixed subsampling."""
    est = estimator if estimator is not None else load_checkpoint(checkpoint)
    manifest = load_manifest(data_dir)
    if manifest["catalog_hash"] != est.catalog_.digest():
        raise ValueError("checkpoint catalog does not match the dataset catalog")
    data = ClipDataset(data_dir, split)
    if len(data) == 0:
        raise ValueError(f"split {split!r} is empty")
    report = est.evaluate(data)
    if report_path is not None:
        report.save(report_path)
    return report
