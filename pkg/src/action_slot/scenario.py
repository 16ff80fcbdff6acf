"""Procedural top-down 4-way intersection scenarios with ground-truth labels.

Layout (image coordinates, y grows downward): Z1 bottom (ego approach), Z2
right, Z3 top, Z4 left, so Z1->Z4 is a left turn. Corner ``Ci`` is the
sidewalk corner between ``Zi`` and ``Z(i+1 mod 4)``. Traffic keeps right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .activity import (
    EGO_ACTIONS,
    AgentKind,
    AtomicActivity,
    ClassCatalog,
    TokenKind,
    TopologyToken,
    enumerate_classes,
    encode_multihot,
    format_label,
    parse_label,
)

__all__ = [
    "InfeasibleConfigError",
    "SemanticClass",
    "GeneratorConfig",
    "WorldGeometry",
    "Agent",
    "Scenario",
    "Clip",
    "build_geometry",
    "sample_scenario",
    "realized_labels",
    "render_semantic",
    "render_frames",
    "render_clip",
    "derive_background_mask",
    "subsample_indices",
    "activity_footprints",
]


class InfeasibleConfigError(ValueError):
    pass


class SemanticClass:
    VOID = 0
    DRIVABLE = 1
    CROSSWALK = 2
    SIDEWALK = 3
    VEHICLE = 4
    TWO_WHEELER = 5
    PEDESTRIAN = 6

    ALL = (0, 1, 2, 3, 4, 5, 6)


_KIND_CLASS = {
    AgentKind.VEHICLE: SemanticClass.VEHICLE,
    AgentKind.TWO_WHEELER: SemanticClass.TWO_WHEELER,
    AgentKind.PEDESTRIAN: SemanticClass.PEDESTRIAN,
}

# Footprint (length, width) in pixels at the reference height of 64 rows.
_FOOTPRINT = {
    AgentKind.VEHICLE: (8.0, 4.5),
    AgentKind.TWO_WHEELER: (5.0, 2.0),
    AgentKind.PEDESTRIAN: (3.5, 3.5),
}

_PALETTE = {
    SemanticClass.VOID: (46, 92, 52),
    SemanticClass.DRIVABLE: (88, 88, 92),
    SemanticClass.CROSSWALK: (176, 176, 168),
    SemanticClass.SIDEWALK: (150, 128, 104),
}
_AGENT_BASE_COLOR = {
    AgentKind.VEHICLE: (40, 110, 220),
    AgentKind.TWO_WHEELER: (240, 150, 20),
    AgentKind.PEDESTRIAN: (220, 40, 160),
}
_EGO_COLOR = (245, 245, 245)

# Outward unit direction of each roadway, and the quadrant sign of each corner.
_ROAD_DIR = {1: (0.0, 1.0), 2: (1.0, 0.0), 3: (0.0, -1.0), 4: (-1.0, 0.0)}
_CORNER_SIGN = {1: (1.0, 1.0), 2: (1.0, -1.0), 3: (-1.0, -1.0), 4: (-1.0, 1.0)}


def _right_of(d):
    # right-hand normal of a travel direction in y-down image coordinates
    return (-d[1], d[0])


@dataclass(frozen=True)
class GeneratorConfig:
    height: int = 64
    width: int = 192
    n_frames: int = 64
    clip_length: int = 16
    classes: Optional[tuple[str, ...]] = None
    activities_per_scenario: tuple[int, int] = (1, 4)
    group_size: tuple[int, int] = (2, 3)
    idle_agents: tuple[int, int] = (0, 6)
    duration_frac: tuple[float, float] = (0.375, 0.9)
    class_weights: Optional[dict] = None
    script: Optional[tuple[dict, ...]] = None

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        for key in ("activities_per_scenario", "group_size", "idle_agents", "duration_frac"):
            if key in d:
                d[key] = tuple(d[key])
        if d.get("classes") is not None:
            d["classes"] = tuple(d["classes"])
        if d.get("script") is not None:
            d["script"] = tuple(dict(s) for s in d["script"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown generator options: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if isinstance(v, tuple):
                v = [dict(x) if isinstance(x, dict) else x for x in v]
            out[name] = v
        return out

    def catalog(self) -> ClassCatalog:
        if self.classes is None:
            return enumerate_classes()
        return ClassCatalog.from_labels(self.classes)

    @property
    def min_visible(self) -> int:
        return math.ceil(self.n_frames / self.clip_length)


@dataclass(frozen=True)
class WorldGeometry:
    height: int
    width: int
    center: tuple[float, float]
    road_half: float
    sidewalk: float
    crosswalk: float
    semantic: np.ndarray = field(repr=False)
    roadway_regions: dict = field(repr=False)
    corner_regions: dict = field(repr=False)

    @property
    def drivable(self):
        s = self.semantic
        return (s == SemanticClass.DRIVABLE) | (s == SemanticClass.CROSSWALK)

    @property
    def walkable(self):
        s = self.semantic
        return (s == SemanticClass.SIDEWALK) | (s == SemanticClass.CROSSWALK)

    def pixel(self, x: float, y: float) -> tuple[int, int]:
        return int(np.clip(math.floor(y), 0, self.height - 1)), int(
            np.clip(math.floor(x), 0, self.width - 1)
        )

    def region_at(self, x: float, y: float) -> Optional[TopologyToken]:
        """Topology token whose region contains the point, if any."""
        r, c = self.pixel(x, y)
        for i, m in self.corner_regions.items():
            if m[r, c]:
                return TopologyToken(TokenKind.CORNER, i)
        for i, m in self.roadway_regions.items():
            if m[r, c]:
                return TopologyToken(TokenKind.ROADWAY, i)
        return None


def build_geometry(height: int = 64, width: int = 192) -> WorldGeometry:
    s = height / 64.0
    hw, sw, cw = 10.0 * s, 5.0 * s, 6.0 * s
    cx, cy = width / 2.0, height / 2.0
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    ax, ay = np.abs(xs - cx), np.abs(ys - cy)

    drivable = (ax <= hw) | (ay <= hw)
    sidewalk = ((ax <= hw + sw) | (ay <= hw + sw)) & ~drivable
    box = (ax <= hw) & (ay <= hw)

    roadway = {}
    crosswalk = np.zeros_like(drivable)
    for i, (dx, dy) in _ROAD_DIR.items():
        along = (xs - cx) * dx + (ys - cy) * dy
        lateral = np.abs((xs - cx) * dy - (ys - cy) * dx)
        roadway[i] = drivable & ~box & (along > hw) & (lateral <= hw)
        crosswalk |= roadway[i] & (along <= hw + cw)

    corner = {}
    for i, (sx, sy) in _CORNER_SIGN.items():
        u, v = (xs - cx) * sx, (ys - cy) * sy
        extent = hw + sw + cw
        corner[i] = sidewalk & (u >= hw) & (v >= hw) & (u <= extent) & (v <= extent)

    sem = np.full((height, width), SemanticClass.VOID, dtype=np.uint8)
    sem[sidewalk] = SemanticClass.SIDEWALK
    sem[drivable] = SemanticClass.DRIVABLE
    sem[crosswalk] = SemanticClass.CROSSWALK
    return WorldGeometry(
        height, width, (cx, cy), hw, sw, cw, sem, roadway, corner
    )


@dataclass
class Agent:
    """One road user. ``track`` rows are ``(frame, x, y, heading)``."""

    kind: AgentKind
    track: np.ndarray
    pattern: Optional[tuple[TopologyToken, TopologyToken]] = None
    color: tuple[int, int, int] = (0, 0, 0)
    is_ego: bool = False

    @property
    def first_frame(self) -> int:
        return int(self.track[0, 0])

    @property
    def last_frame(self) -> int:
        return int(self.track[-1, 0])

    def pose_at(self, frame: int):
        row = frame - self.first_frame
        if row < 0 or row >= len(self.track):
            return None
        return self.track[row, 1:]


@dataclass
class Scenario:
    geometry: WorldGeometry
    agents: list
    length: int
    labels: frozenset
    ego_action: str
    ego: Agent
    seed: int
    config: GeneratorConfig = field(repr=False, default_factory=GeneratorConfig)

    @property
    def label_strings(self) -> list[str]:
        return sorted(format_label(a) for a in self.labels)


@dataclass
class Clip:
    frames: np.ndarray  # (T, H, W, 3) uint8
    background_masks: np.ndarray  # (T, H, W) uint8, 1 = background
    label: np.ndarray
    ego_action: int
    seed: int
    frame_indices: np.ndarray


# ---------------------------------------------------------------- paths


def _lane_point(geo, road, along, lateral):
    dx, dy = _ROAD_DIR[road]
    px, py = -dy, dx
    cx, cy = geo.center
    return np.array([cx + dx * along + px * lateral, cy + dy * along + py * lateral])


def _lane_offset(geo, road, inbound, kind):
    d = _ROAD_DIR[road]
    travel = (-d[0], -d[1]) if inbound else d
    r = _right_of(travel)
    # lateral axis used by _lane_point is (-dy, dx) of the outward direction
    sign = r[0] * -d[1] + r[1] * d[0]
    off = geo.road_half * (0.5 if kind is AgentKind.VEHICLE else 0.78)
    return sign * off


def _road_extent(geo, road):
    cx, cy = geo.center
    dx, dy = _ROAD_DIR[road]
    span = (geo.width - cx) if dx > 0 else cx if dx < 0 else (geo.height - cy) if dy > 0 else cy
    return span - 1.5


def _vehicle_path(geo, src, dst, kind, n=400):
    hw = geo.road_half
    lat_in = _lane_offset(geo, src, True, kind)
    lat_out = _lane_offset(geo, dst, False, kind)
    p0 = _lane_point(geo, src, _road_extent(geo, src), lat_in)
    p1 = _lane_point(geo, src, hw, lat_in)
    p2 = _lane_point(geo, dst, hw, lat_out)
    p3 = _lane_point(geo, dst, _road_extent(geo, dst), lat_out)
    d_in = np.array(_ROAD_DIR[src]) * -1.0
    d_out = np.array(_ROAD_DIR[dst])
    # control point where the two lane lines meet; straight moves use the midpoint
    m = np.array([[d_in[0], -d_out[0]], [d_in[1], -d_out[1]]])
    if abs(np.linalg.det(m)) < 1e-9:
        ctrl = (p1 + p2) / 2
    else:
        t = np.linalg.solve(m, p2 - p1)
        ctrl = p1 + t[0] * d_in
    s = np.linspace(0, 1, n)[:, None]
    curve = (1 - s) ** 2 * p1 + 2 * (1 - s) * s * ctrl + s**2 * p2
    return np.vstack([_segment(p0, p1, n), curve[1:], _segment(p2, p3, n)[1:]])


def _corner_anchor(geo, corner, road, along_jitter=0.0):
    """Point inside corner ``corner`` on the crosswalk line of ``road``."""
    hw, sw, cw = geo.road_half, geo.sidewalk, geo.crosswalk
    cx, cy = geo.center
    dx, dy = _ROAD_DIR[road]
    sx, sy = _CORNER_SIGN[corner]
    along = hw + cw / 2 + along_jitter
    lat = hw + sw / 2
    # lateral axis is whichever of x/y is perpendicular to the road
    if dx == 0:
        return np.array([cx + sx * lat, cy + dy * along])
    return np.array([cx + dx * along, cy + sy * lat])


def _shared_road(ci, cj):
    # Ci touches Zi and Z(i+1); adjacent corners share exactly one roadway
    ri = {ci, ci % 4 + 1}
    rj = {cj, cj % 4 + 1}
    (road,) = ri & rj
    return road


def _pedestrian_path(geo, src, dst, jitter=0.0, n=200):
    road = _shared_road(src, dst)
    return _segment(_corner_anchor(geo, src, road, jitter), _corner_anchor(geo, dst, road, jitter), n)


def _segment(a, b, n):
    s = np.linspace(0, 1, n)[:, None]
    return a + s * (b - a)


def _resample(path, n_steps):
    """Positions and headings at ``n_steps + 1`` equal-arc-length stations."""
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0, cum[-1], n_steps + 1)
    x = np.interp(s, cum, path[:, 0])
    y = np.interp(s, cum, path[:, 1])
    d = np.gradient(np.stack([x, y], 1), axis=0) if n_steps > 0 else np.array([[1.0, 0.0]])
    heading = np.arctan2(d[:, 1], d[:, 0])
    return x, y, heading


def _make_track(path, start, duration):
    x, y, h = _resample(path, duration)
    frames = np.arange(start, start + duration + 1)
    return np.stack([frames, x, y, h], axis=1)


def _static_track(point, heading, length):
    frames = np.arange(length)
    return np.stack(
        [frames, np.full(length, point[0]), np.full(length, point[1]), np.full(length, heading)], 1
    )


def _jitter_color(base, rng):
    c = np.asarray(base, float) + rng.uniform(-25, 25, size=3)
    return tuple(int(v) for v in np.clip(c, 0, 255))


# ---------------------------------------------------------------- labels


def realized_labels(agents: Sequence[Agent]) -> frozenset:
    """Apply the group rule to a set of agents.

    Agents sharing a (source, destination, kind) pattern form a group label
    when at least two of them are active during a common frame; otherwise the
    pattern yields a single-agent label.
    """
    by_pattern = {}
    for a in agents:
        if a.pattern is None or a.is_ego:
            continue
        by_pattern.setdefault((a.pattern, a.kind), []).append((a.first_frame, a.last_frame))
    out = set()
    for ((src, dst), kind), spans in by_pattern.items():
        spans.sort()
        group = any(
            spans[j][0] <= spans[i][1] for i in range(len(spans)) for j in range(i + 1, len(spans))
        )
        out.add(AtomicActivity(src, dst, kind, group))
    return frozenset(out)


def _visible_frames(geo, agents):
    frames = set()
    for a in agents:
        for f, x, y, h in a.track:
            if footprint(geo, a.kind, x, y, h).any():
                frames.add(int(f))
    return frames


# ---------------------------------------------------------------- sampling


def _parse_plan_item(item):
    if isinstance(item, dict):
        pat = parse_label(item["pattern"])
        n = int(item.get("agents", 2 if pat.group else 1))
        return pat, n, bool(item.get("overlap", True))
    a = item if isinstance(item, AtomicActivity) else parse_label(item)
    return a, None, True


def sample_scenario(
    config: GeneratorConfig = GeneratorConfig(),
    seed: int = 0,
    labels: Optional[Sequence] = None,
) -> Scenario:
    """Deterministically sample one scenario.

    ``labels`` fixes the activities to realize; otherwise ``config.script``
    (explicit agents per pattern) or a random draw from the catalog is used.
    """
    rng = np.random.default_rng(seed)
    geo = build_geometry(config.height, config.width)
    L = config.n_frames
    catalog = config.catalog()
    dmin = max(config.min_visible, int(math.ceil(config.duration_frac[0] * L)))
    dmax = min(L - 1, int(config.duration_frac[1] * L))
    if dmin > dmax:
        raise InfeasibleConfigError(
            f"activity duration window [{dmin}, {dmax}] is empty for {L} frames"
        )

    if labels is not None:
        plan = [_parse_plan_item(x) for x in labels]
    elif config.script is not None:
        plan = [_parse_plan_item(x) for x in config.script]
    else:
        plan = [(a, None, True) for a in _draw_activities(catalog, config, rng)]

    agents = []
    for act, n, overlap in plan:
        if n is None:
            n = int(rng.integers(config.group_size[0], config.group_size[1] + 1)) if act.group else 1
        if n < 1:
            raise InfeasibleConfigError("a planned pattern needs at least one agent")
        agents.extend(_spawn_pattern(geo, act, n, overlap, dmin, dmax, L, rng))

    ego_action = EGO_ACTIONS[int(rng.integers(len(EGO_ACTIONS)))]
    ego = _spawn_ego(geo, ego_action, dmin, dmax, L, rng)

    n_idle = int(rng.integers(config.idle_agents[0], config.idle_agents[1] + 1))
    for _ in range(n_idle):
        agents.append(_spawn_idle(geo, L, rng))

    labels_out = realized_labels(agents)
    for act in labels_out:
        execs = [a for a in agents if a.pattern == (act.source, act.destination) and a.kind is act.agent]
        if len(_visible_frames(geo, execs)) < config.min_visible:
            raise InfeasibleConfigError(f"{format_label(act)} is visible for too few frames")
    return Scenario(geo, agents, L, labels_out, ego_action, ego, int(seed), config)


def _draw_activities(catalog, config, rng):
    lo, hi = config.activities_per_scenario
    k = int(rng.integers(lo, hi + 1))
    w = np.ones(len(catalog))
    if config.class_weights:
        for lab, v in config.class_weights.items():
            w[catalog.index(lab)] = float(v)
    chosen, patterns = [], set()
    order = rng.choice(len(catalog), size=len(catalog), replace=False, p=w / w.sum())
    for i in order:
        a = catalog[int(i)]
        if a.pattern in patterns:
            continue
        chosen.append(a)
        patterns.add(a.pattern)
        if len(chosen) == k:
            break
    return chosen


def _spawn_pattern(geo, act, n, overlap, dmin, dmax, L, rng):
    kind = act.agent
    src, dst = act.source.index, act.destination.index
    jitter = float(rng.uniform(-1.0, 1.0)) * geo.crosswalk / 4 if kind is AgentKind.PEDESTRIAN else 0.0
    if kind is AgentKind.PEDESTRIAN:
        path = _pedestrian_path(geo, src, dst, jitter)
    else:
        path = _vehicle_path(geo, src, dst, kind)
    length = float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())
    fp_len = _FOOTPRINT[kind][0] * geo.height / 64.0

    if overlap or n == 1:
        def gap_for(d):
            return max(1, int(math.ceil((fp_len + 1.5) * d / length))) if n > 1 else 0

        duration = int(rng.integers(dmin, dmax + 1))
        while duration >= dmin and duration + (n - 1) * gap_for(duration) > L - 1:
            duration -= 1
        if duration < dmin or gap_for(duration) > duration:
            raise InfeasibleConfigError(f"{n} agents cannot overlap on {format_label(act)}")
        gap = gap_for(duration)
        start = int(rng.integers(0, L - 1 - duration - (n - 1) * gap + 1))
        starts = [start + k * gap for k in range(n)]
    else:
        slot = (L - 1) // n
        if slot - 1 < dmin:
            raise InfeasibleConfigError(f"{n} sequential agents do not fit in {L} frames")
        duration = int(rng.integers(dmin, min(dmax, slot - 1) + 1))
        starts = [k * slot + int(rng.integers(0, slot - duration)) for k in range(n)]

    return [
        Agent(
            kind,
            _make_track(path, s, duration),
            (act.source, act.destination),
            _jitter_color(_AGENT_BASE_COLOR[kind], rng),
        )
        for s in starts
    ]


def _spawn_ego(geo, action, dmin, dmax, L, rng):
    dst = int(action.split("-")[1][1])
    if dst == 1:
        lat = _lane_offset(geo, 1, True, AgentKind.VEHICLE)
        p = _lane_point(geo, 1, _road_extent(geo, 1) - float(rng.uniform(0, 4)), lat)
        track = _static_track(p, -math.pi / 2, L)
    else:
        duration = int(rng.integers(dmin, dmax + 1))
        start = int(rng.integers(0, L - duration))
        track = _make_track(_vehicle_path(geo, 1, dst, AgentKind.VEHICLE), start, duration)
    return Agent(AgentKind.VEHICLE, track, None, _EGO_COLOR, is_ego=True)


def _spawn_idle(geo, L, rng):
    road = int(rng.integers(1, 5))
    dx, dy = _ROAD_DIR[road]
    heading = math.atan2(dy, dx)
    lo = geo.road_half + geo.crosswalk + geo.sidewalk + 4
    hi = _road_extent(geo, road) - 4
    along = float(rng.uniform(lo, max(lo, hi)))
    side = 1.0 if rng.random() < 0.5 else -1.0
    if rng.random() < 0.5:
        kind = AgentKind.VEHICLE
        lat = side * (geo.road_half - 0.3 * _FOOTPRINT[kind][1] * geo.height / 64.0 - 1.0)
    else:
        kind = AgentKind.PEDESTRIAN
        lat = side * (geo.road_half + geo.sidewalk / 2)
    p = _lane_point(geo, road, along, lat)
    return Agent(kind, _static_track(p, heading, L), None, _jitter_color(_AGENT_BASE_COLOR[kind], rng))


# ---------------------------------------------------------------- rendering


def footprint(geo: WorldGeometry, kind: AgentKind, x: float, y: float, heading: float) -> np.ndarray:
    """Boolean raster of the pixels whose centers fall inside the agent."""
    length, width = (v * geo.height / 64.0 for v in _FOOTPRINT[kind])
    reach = math.hypot(length, width) / 2 + 1
    r0, r1 = max(0, int(y - reach)), min(geo.height, int(y + reach) + 2)
    c0, c1 = max(0, int(x - reach)), min(geo.width, int(x + reach) + 2)
    out = np.zeros((geo.height, geo.width), dtype=bool)
    if r0 >= r1 or c0 >= c1:
        return out
    ys, xs = np.mgrid[r0:r1, c0:c1].astype(np.float64) + 0.5
    ddx, ddy = xs - x, ys - y
    if kind is AgentKind.PEDESTRIAN:
        inside = ddx**2 + ddy**2 <= (width / 2) ** 2
    else:
        c, s = math.cos(heading), math.sin(heading)
        inside = (np.abs(ddx * c + ddy * s) <= length / 2) & (np.abs(-ddx * s + ddy * c) <= width / 2)
    out[r0:r1, c0:c1] = inside
    return out


def _draw_order(scenario):
    # pedestrians on top so they stay visible on crosswalks
    rank = {AgentKind.VEHICLE: 0, AgentKind.TWO_WHEELER: 1, AgentKind.PEDESTRIAN: 2}
    agents = [scenario.ego] + list(scenario.agents)
    return sorted(agents, key=lambda a: (rank[a.kind], a.pattern is not None))


def render_semantic(scenario: Scenario, frame: int) -> tuple[np.ndarray, np.ndarray]:
    """Semantic class raster and RGB image of one frame."""
    geo = scenario.geometry
    sem = geo.semantic.copy()
    rgb = np.zeros((geo.height, geo.width, 3), dtype=np.uint8)
    for cls, color in _PALETTE.items():
        rgb[sem == cls] = color
    for a in _draw_order(scenario):
        pose = a.pose_at(frame)
        if pose is None:
            continue
        m = footprint(geo, a.kind, *pose)
        sem[m] = _KIND_CLASS[a.kind]
        rgb[m] = a.color
    return sem, rgb


def render_frames(scenario: Scenario, indices: Optional[Sequence[int]] = None):
    """RGB frames ``(T, H, W, 3)`` and background masks ``(T, H, W)``."""
    if indices is None:
        indices = range(scenario.length)
    frames, masks = [], []
    for f in indices:
        sem, rgb = render_semantic(scenario, int(f))
        frames.append(rgb)
        masks.append(derive_background_mask(sem))
    return np.stack(frames), np.stack(masks)


def derive_background_mask(semantic_raster: np.ndarray) -> np.ndarray:
    """1 on void pixels; 0 on road users, drivable area, crosswalks and sidewalks."""
    sem = np.asarray(semantic_raster)
    if not np.isin(sem, SemanticClass.ALL).all():
        bad = np.setdiff1d(np.unique(sem), SemanticClass.ALL)
        raise ValueError(f"unknown semantic class ids: {bad.tolist()}")
    return (sem == SemanticClass.VOID).astype(np.uint8)


def subsample_indices(length: int, T: int, mode: str = "fixed", seed=None) -> np.ndarray:
    """``T`` frame indices at a uniform stride of ``length // T``.

    ``fixed`` starts at frame 0; ``random`` draws the start offset.
    """
    if T < 1:
        raise ValueError("T must be positive")
    if T > length:
        raise ValueError(f"clip length {T} exceeds scenario length {length}")
    stride = length // T
    slack = length - ((T - 1) * stride + 1)
    if mode == "fixed":
        start = 0
    elif mode == "random":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        start = int(rng.integers(0, slack + 1))
    else:
        raise ValueError(f"unknown subsample mode {mode!r}")
    return start + stride * np.arange(T)


def render_clip(scenario: Scenario, T: int = 16, subsample_mode: str = "fixed", seed=None) -> Clip:
    idx = subsample_indices(scenario.length, T, subsample_mode, seed)
    frames, masks = render_frames(scenario, idx)
    catalog = scenario.config.catalog()
    return Clip(
        frames,
        masks,
        encode_multihot(scenario.labels, catalog),
        EGO_ACTIONS.index(scenario.ego_action),
        scenario.seed,
        idx,
    )


def activity_footprints(scenario: Scenario, indices: Sequence[int]) -> dict:
    """Per-label ``(T, H, W)`` union of the footprints of its executing agents."""
    geo = scenario.geometry
    out = {}
    for act in scenario.labels:
        execs = [
            a for a in scenario.agents
            if a.pattern == (act.source, act.destination) and a.kind is act.agent
        ]
        m = np.zeros((len(indices), geo.height, geo.width), dtype=bool)
        for t, f in enumerate(indices):
            for a in execs:
                pose = a.pose_at(int(f))
                if pose is not None:
                    m[t] |= footprint(geo, a.kind, *pose)
        out[format_label(act)] = m
    return out


def with_config(config: GeneratorConfig, **changes) -> GeneratorConfig:
    return replace(config, **changes)
