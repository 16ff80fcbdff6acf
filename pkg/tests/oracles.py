"""Independent reference implementations used only by the tests.

Each oracle re-derives a quantity from first principles without calling the
code under test for the part being checked.
"""
from __future__ import annotations

import math

import numpy as np

from action_slot.activity import AtomicActivity, format_label


def replay_labels(scenario) -> set[str]:
    """Label set recovered from raw trajectories and the world geometry.

    Moving agents are classified by the regions containing their first and
    last positions; agents that never move are idle. Executors of one pattern
    form a group when the frame sets of any two of them intersect.
    """
    geo = scenario.geometry
    spans = {}
    for agent in scenario.agents:
        xy = agent.track[:, 1:3]
        if np.abs(xy - xy[0]).max() < 1.0:
            continue
        key = (geo.region_at(*xy[0]), geo.region_at(*xy[-1]), agent.kind)
        spans.setdefault(key, []).append(set(agent.track[:, 0].astype(int).tolist()))
    out = set()
    for (src, dst, kind), frames in spans.items():
        group = any(frames[i] & frames[j] for i in range(len(frames)) for j in range(i + 1, len(frames)))
        out.add(format_label(AtomicActivity(src, dst, kind, group)))
    return out


def brute_force_ap(scores, labels) -> float:
    """Precision at every positive rank, ranks found by pairwise comparison.

    The rank of sample ``i`` is one plus the number of samples that sort
    before it: strictly higher score, or equal score and earlier position.
    """
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    n = len(scores)
    rank = [
        1 + sum(1 for j in range(n) if scores[j] > scores[i] or (scores[j] == scores[i] and j < i))
        for i in range(n)
    ]
    total = 0.0
    n_pos = sum(labels)
    for i in range(n):
        if labels[i]:
            hits = sum(1 for j in range(n) if labels[j] and rank[j] <= rank[i])
            total += hits / rank[i]
    return total / n_pos


def brute_force_map(score_matrix, label_matrix) -> float:
    s, y = np.asarray(score_matrix), np.asarray(label_matrix)
    aps = [brute_force_ap(s[:, c], y[:, c]) for c in range(s.shape[1]) if y[:, c].sum() > 0]
    return sum(aps) / len(aps)


def bce(p: float, y: int) -> float:
    return -math.log(p) if y else -math.log(1.0 - p)
