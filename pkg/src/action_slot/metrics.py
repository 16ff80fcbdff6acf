"""Average precision, mAP and the evaluation report."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .activity import SLICE_KEYS, ClassCatalog

__all__ = ["average_precision", "mean_average_precision", "EvalReport"]


def average_precision(scores, labels) -> float:
    """Non-interpolated AP: mean precision at the rank of each positive.

    Samples are ranked by descending score; ties keep their original order.
    Raises ``ValueError`` when there are no positives.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    pos = labels > 0
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise ValueError("average precision is undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    tp = np.cumsum(hits)
    ranks = np.arange(1, len(hits) + 1)
    return float((tp[hits] / ranks[hits]).sum() / n_pos)


@dataclass
class EvalReport:
    labels: list
    per_class_ap: list  # None where the class has no positives
    map: float
    slices: dict
    excluded: list
    n_samples: int
    ego_accuracy: Optional[float] = None
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_class_ap"] = {lab: ap for lab, ap in zip(self.labels, self.per_class_ap)}
        del d["labels"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def mean_average_precision(score_matrix, label_matrix, catalog: Optional[ClassCatalog] = None) -> EvalReport:
    """Per-class AP over samples; classes without positives are excluded.

    With a ``catalog`` the report also carries per-agent-kind slice means
    (``C``, ``K``, ``P``, ``C+``, ``K+``, ``P+``); empty slices are ``None``.
    """
    scores = np.asarray(score_matrix, dtype=np.float64)
    labels = np.asarray(label_matrix)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise ValueError(f"score matrix {scores.shape} vs label matrix {labels.shape}")
    if scores.shape[0] < 1:
        raise ValueError("need at least one sample")
    n_cls = scores.shape[1]
    names = catalog.labels if catalog is not None else [str(i) for i in range(n_cls)]
    if len(names) != n_cls:
        raise ValueError(f"catalog has {len(names)} classes, scores have {n_cls}")
    aps = []
    for c in range(n_cls):
        aps.append(average_precision(scores[:, c], labels[:, c]) if (labels[:, c] > 0).any() else None)
    excluded = [names[c] for c in range(n_cls) if aps[c] is None]
    valid = [a for a in aps if a is not None]
    m = float(np.mean(valid)) if valid else math.nan
    slices = {}
    if catalog is not None:
        slices = {k: _mean([aps[i] for i in idx]) for k, idx in catalog.slices().items()}
    else:
        slices = {k: None for k in SLICE_KEYS}
    return EvalReport(list(names), aps, m, slices, excluded, int(scores.shape[0]))
