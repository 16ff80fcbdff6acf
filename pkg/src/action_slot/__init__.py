"""Allocated slot attention for multi-label atomic activity recognition."""
from .activity import (
    EGO_ACTIONS,
    AgentKind,
    AtomicActivity,
    ClassCatalog,
    LabelError,
    TopologyToken,
    encode_multihot,
    enumerate_classes,
    format_label,
    parse_label,
)
from .estimator import ActionSlotClassifier, load_checkpoint, save_checkpoint
from .metrics import EvalReport, average_precision, mean_average_precision

__version__ = "0.1.0"

__all__ = [
    "EGO_ACTIONS",
    "AgentKind",
    "AtomicActivity",
    "ClassCatalog",
    "LabelError",
    "TopologyToken",
    "encode_multihot",
    "enumerate_classes",
    "format_label",
    "parse_label",
    "ActionSlotClassifier",
    "load_checkpoint",
    "save_checkpoint",
    "EvalReport",
    "average_precision",
    "mean_average_precision",
]
