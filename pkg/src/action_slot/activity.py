"""Topology-aware atomic-activity labels.

Labels have the canonical form ``SRC-DST:AGENT[+]``, e.g. ``Z1-Z4:C+`` for a
group of vehicles turning left from the ego approach. Roadways are ``Z1..Z4``
and corners ``C1..C4``; corner ``Ci`` sits between roadways ``Zi`` and
``Z(i+1 mod 4)``, so pedestrians only walk between corners whose indices
differ by one (mod 4).
"""
from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LabelError",
    "TokenKind",
    "TopologyToken",
    "AgentKind",
    "AtomicActivity",
    "ClassCatalog",
    "EGO_ACTIONS",
    "SLICE_KEYS",
    "parse_label",
    "format_label",
    "enumerate_classes",
    "encode_multihot",
    "decode_multihot",
    "corners_adjacent",
]


class LabelError(ValueError):
    """Raised for malformed or topologically invalid activity labels."""


class TokenKind(str, enum.Enum):
    ROADWAY = "Z"
    CORNER = "C"


@dataclass(frozen=True, order=True)
class TopologyToken:
    kind: TokenKind
    index: int

    def __post_init__(self):
        if not 1 <= self.index <= 4:
            raise LabelError(f"topology index must be in 1..4, got {self.index}")

    def __str__(self):
        return f"{self.kind.value}{self.index}"


class AgentKind(str, enum.Enum):
    VEHICLE = "C"
    TWO_WHEELER = "K"
    PEDESTRIAN = "P"

    @property
    def symbol(self) -> str:
        return self.value


def corners_adjacent(i: int, j: int) -> bool:
    return (i - j) % 4 in (1, 3)


@dataclass(frozen=True)
class AtomicActivity:
    source: TopologyToken
    destination: TopologyToken
    agent: AgentKind
    group: bool = False

    def __post_init__(self):
        src, dst = self.source, self.destination
        if src == dst:
            raise LabelError(f"source equals destination ({src})")
        if src.kind != dst.kind:
            raise LabelError(f"mixed topology kinds {src}-{dst}")
        if self.agent is AgentKind.PEDESTRIAN:
            if src.kind is not TokenKind.CORNER:
                raise LabelError("pedestrians move between corners, not roadways")
            if not corners_adjacent(src.index, dst.index):
                raise LabelError(f"diagonal corner pair {src}-{dst} is not a class")
        elif src.kind is not TokenKind.ROADWAY:
            raise LabelError(f"agent {self.agent.symbol} moves between roadways only")

    @property
    def pattern(self) -> tuple[TopologyToken, TopologyToken, AgentKind]:
        """The (source, destination, agent) triple shared by single and group forms."""
        return (self.source, self.destination, self.agent)

    @property
    def slice_key(self) -> str:
        return self.agent.symbol + ("+" if self.group else "")

    def __str__(self):
        return format_label(self)


# Ego approaches from Z1; Z1-Z1:E marks an undetermined ego action.
EGO_ACTIONS: tuple[str, ...] = ("Z1-Z2:E", "Z1-Z3:E", "Z1-Z4:E", "Z1-Z1:E")

SLICE_KEYS: tuple[str, ...] = ("C", "K", "P", "C+", "K+", "P+")

_LABEL_RE = re.compile(
    r"^\s*([ZC])\s*(\d+)\s*-\s*([ZC])\s*(\d+)\s*:\s*([CKP])\s*(\+?)\s*$"
)


def parse_label(text: str) -> AtomicActivity:
    """Parse ``"SRC-DST:AGENT[+]"`` into an :class:`AtomicActivity`.

    Whitespace around tokens is ignored. Raises :class:`LabelError` on bad
    syntax or on any topology violation.
    """
    if not isinstance(text, str) or not text.strip():
        raise LabelError("empty label")
    m = _LABEL_RE.match(text)
    if m is None:
        raise LabelError(f"malformed label {text!r}")
    sk, si, dk, di, agent, plus = m.groups()
    return AtomicActivity(
        TopologyToken(TokenKind(sk), int(si)),
        TopologyToken(TokenKind(dk), int(di)),
        AgentKind(agent),
        group=plus == "+",
    )


def format_label(activity: AtomicActivity) -> str:
    plus = "+" if activity.group else ""
    return f"{activity.source}-{activity.destination}:{activity.agent.symbol}{plus}"


def _roadway_pairs():
    return [
        (TopologyToken(TokenKind.ROADWAY, i), TopologyToken(TokenKind.ROADWAY, j))
        for i, j in permutations(range(1, 5), 2)
    ]


def _corner_pairs():
    return [
        (TopologyToken(TokenKind.CORNER, i), TopologyToken(TokenKind.CORNER, j))
        for i, j in permutations(range(1, 5), 2)
        if corners_adjacent(i, j)
    ]


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered label space; position ``i`` is bound to action slot ``i``."""

    classes: tuple[AtomicActivity, ...]
    index_of: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, a in enumerate(self.classes):
            key = format_label(a)
            if key in index:
                raise LabelError(f"duplicate class {key}")
            index[key] = i
        object.__setattr__(self, "index_of", index)

    @classmethod
    def from_labels(cls, labels: Iterable[str | AtomicActivity]) -> "ClassCatalog":
        return cls(tuple(a if isinstance(a, AtomicActivity) else parse_label(a) for a in labels))

    def __len__(self):
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __getitem__(self, i):
        return self.classes[i]

    def __contains__(self, activity):
        if isinstance(activity, str):
            activity = parse_label(activity)
        return format_label(activity) in self.index_of

    def index(self, activity: str | AtomicActivity) -> int:
        if isinstance(activity, str):
            activity = parse_label(activity)
        try:
            return self.index_of[format_label(activity)]
        except KeyError:
            raise LabelError(f"{format_label(activity)} is not in the catalog") from None

    @property
    def labels(self) -> list[str]:
        return [format_label(a) for a in self.classes]

    def slices(self) -> dict[str, list[int]]:
        """Class indices per agent-kind slice (``C``, ``K``, ``P``, ``C+``, ...)."""
        out = {k: [] for k in SLICE_KEYS}
        for i, a in enumerate(self.classes):
            out[a.slice_key].append(i)
        return out

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.labels).encode()).hexdigest()


def enumerate_classes() -> ClassCatalog:
    """The 64-class 4-way-intersection catalog in canonical order.

    Order: vehicle singles, vehicle groups, two-wheeler singles, two-wheeler
    groups, pedestrian singles, pedestrian groups; pairs lexicographic by
    (source, destination) within each block.
    """
    classes = []
    for agent, pairs in (
        (AgentKind.VEHICLE, _roadway_pairs()),
        (AgentKind.TWO_WHEELER, _roadway_pairs()),
        (AgentKind.PEDESTRIAN, _corner_pairs()),
    ):
        for group in (False, True):
            classes.extend(AtomicActivity(s, d, agent, group) for s, d in sorted(pairs))
    return ClassCatalog(tuple(classes))


def encode_multihot(
    activities: Iterable[str | AtomicActivity], catalog: ClassCatalog
) -> np.ndarray:
    """Multi-hot ``uint8`` vector of length ``len(catalog)``."""
    bits = np.zeros(len(catalog), dtype=np.uint8)
    for a in activities:
        bits[catalog.index(a)] = 1
    return bits


def decode_multihot(bits: Sequence[int], catalog: ClassCatalog) -> list[str]:
    return [catalog.labels[i] for i in np.flatnonzero(np.asarray(bits))]
