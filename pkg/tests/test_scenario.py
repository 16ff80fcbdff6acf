import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from action_slot.activity import AgentKind, encode_multihot, enumerate_classes
from action_slot.scenario import (
    GeneratorConfig,
    InfeasibleConfigError,
    SemanticClass,
    activity_footprints,
    build_geometry,
    derive_background_mask,
    footprint,
    render_clip,
    render_frames,
    sample_scenario,
    subsample_indices,
)
from oracles import replay_labels

S = SemanticClass


def _scripted(*items, idle=(0, 0)):
    return GeneratorConfig(script=tuple(items), idle_agents=idle)


def test_geometry_layout():
    geo = build_geometry()
    assert geo.semantic.shape == (64, 192)
    # Z1 bottom, Z2 right, Z3 top, Z4 left
    cx, cy = geo.center
    assert geo.region_at(cx, 62).index == 1 and geo.region_at(cx, 62).kind.value == "Z"
    assert geo.region_at(188, cy).index == 2
    assert geo.region_at(cx, 1).index == 3
    assert geo.region_at(3, cy).index == 4
    # corner i sits between roadway i and roadway i+1
    for i, m in geo.corner_regions.items():
        assert (geo.semantic[m] == S.SIDEWALK).all()
        rows, cols = np.nonzero(m)
        x, y = cols.mean() - cx, rows.mean() - cy
        assert {1: x > 0 and y > 0, 2: x > 0 and y < 0, 3: x < 0 and y < 0, 4: x < 0 and y > 0}[i]
    for i, m in geo.roadway_regions.items():
        assert geo.drivable[m].all()


def test_sample_deterministic():
    a, b = sample_scenario(GeneratorConfig(), 0), sample_scenario(GeneratorConfig(), 0)
    assert a.labels == b.labels and a.ego_action == b.ego_action
    assert len(a.agents) == len(b.agents)
    for x, y in zip(a.agents, b.agents):
        assert np.array_equal(x.track, y.track) and x.color == y.color
    fa, _ = render_frames(a)
    fb, _ = render_frames(b)
    assert np.array_equal(fa, fb)


def test_single_vehicle_left_turn():
    sc = sample_scenario(_scripted({"pattern": "Z1-Z4:C", "agents": 1}), 3)
    assert sc.label_strings == ["Z1-Z4:C"]


def test_three_overlapping_vehicles_form_group():
    sc = sample_scenario(_scripted({"pattern": "Z1-Z4:C", "agents": 3, "overlap": True}), 3)
    assert sc.label_strings == ["Z1-Z4:C+"]
    assert sum(a.pattern is not None for a in sc.agents) == 3


def test_sequential_executors_stay_single():
    sc = sample_scenario(_scripted({"pattern": "Z4-Z1:K", "agents": 2, "overlap": False}), 5)
    assert sc.label_strings == ["Z4-Z1:K"]
    a, b = [x for x in sc.agents if x.pattern is not None]
    assert a.last_frame < b.first_frame or b.last_frame < a.first_frame


def test_idle_agents_contribute_no_labels():
    sc = sample_scenario(_scripted({"pattern": "C1-C2:P", "agents": 1}, idle=(6, 6)), 1)
    assert sc.label_strings == ["C1-C2:P"]
    idle = [a for a in sc.agents if a.pattern is None]
    assert len(idle) == 6
    for a in idle:
        assert np.abs(a.track[:, 1:3] - a.track[0, 1:3]).max() < 1e-9


def test_infeasible_config():
    with pytest.raises(InfeasibleConfigError):
        sample_scenario(GeneratorConfig(duration_frac=(0.95, 0.96)), 0)
    with pytest.raises(InfeasibleConfigError):
        sample_scenario(_scripted({"pattern": "Z1-Z2:C", "agents": 40, "overlap": False}), 0)


@pytest.mark.parametrize("seed", range(40))
def test_replay_oracle(seed):
    sc = sample_scenario(GeneratorConfig(), seed)
    assert replay_labels(sc) == set(sc.label_strings)
    assert len(sc.labels) >= 1


@pytest.mark.parametrize("seed", range(10))
def test_mask_disjoint_from_agents(seed):
    sc = sample_scenario(GeneratorConfig(), seed)
    frames, masks = render_frames(sc)
    geo = sc.geometry
    for f in range(sc.length):
        for a in [sc.ego] + sc.agents:
            pose = a.pose_at(f)
            if pose is not None:
                assert not (masks[f].astype(bool) & footprint(geo, a.kind, *pose)).any()
    # off the road network the mask is exactly the void raster
    assert np.array_equal(masks[0], (geo.semantic == S.VOID).astype(np.uint8))


@pytest.mark.parametrize("seed", range(20))
def test_visibility_and_placement(seed):
    cfg = GeneratorConfig()
    sc = sample_scenario(cfg, seed)
    geo = sc.geometry
    for act in sc.labels:
        execs = [a for a in sc.agents if a.pattern == (act.source, act.destination) and a.kind is act.agent]
        visible = {int(f) for a in execs for f, x, y, h in a.track if footprint(geo, a.kind, x, y, h).any()}
        assert len(visible) >= math.ceil(cfg.n_frames / cfg.clip_length)
    for a in [sc.ego] + sc.agents:
        allowed = geo.walkable if a.kind is AgentKind.PEDESTRIAN else geo.drivable
        for _, x, y, _ in a.track:
            assert allowed[geo.pixel(x, y)]


def test_background_mask_examples():
    assert derive_background_mask(np.zeros((3, 4), np.uint8)).tolist() == [[1] * 4] * 3
    assert derive_background_mask(np.full((3, 4), S.DRIVABLE)).sum() == 0
    raster = np.array([[S.VOID, S.VEHICLE], [S.SIDEWALK, S.CROSSWALK]])
    assert derive_background_mask(raster).tolist() == [[1, 0], [0, 0]]
    for cls in (S.TWO_WHEELER, S.PEDESTRIAN):
        assert derive_background_mask(np.array([[cls]])).tolist() == [[0]]
    with pytest.raises(ValueError):
        derive_background_mask(np.array([[7]]))


@given(st.lists(st.lists(st.sampled_from(SemanticClass.ALL), min_size=3, max_size=3), min_size=2, max_size=4))
def test_background_mask_cellwise(rows):
    raster = np.array(rows)
    expected = [[1 if c == S.VOID else 0 for c in r] for r in rows]
    assert derive_background_mask(raster).tolist() == expected


def test_fixed_subsample():
    assert subsample_indices(64, 16, "fixed").tolist() == list(range(0, 64, 4))
    with pytest.raises(ValueError):
        subsample_indices(8, 16)
    with pytest.raises(ValueError):
        subsample_indices(64, 16, "bogus")


def _valid_windows(length, T):
    # every start for which T frames at the uniform stride fit in the scenario
    stride = length // T
    return [tuple(range(s, s + stride * T, stride)) for s in range(length) if s + stride * (T - 1) < length]


@settings(max_examples=60)
@given(st.integers(1, 80), st.integers(1, 32), st.integers(0, 2**32 - 1))
def test_random_subsample_is_a_valid_window(length, T, seed):
    if T > length:
        with pytest.raises(ValueError):
            subsample_indices(length, T, "random", seed)
        return
    idx = tuple(subsample_indices(length, T, "random", seed).tolist())
    assert idx in _valid_windows(length, T)


def test_random_clips_share_labels():
    sc = sample_scenario(GeneratorConfig(), 2)
    a = render_clip(sc, 16, "random", 1)
    b = render_clip(sc, 16, "random", 2)
    assert np.array_equal(a.label, b.label)
    windows = _valid_windows(64, 16)
    assert tuple(a.frame_indices.tolist()) in windows and tuple(b.frame_indices.tolist()) in windows
    assert np.array_equal(a.label, encode_multihot(sc.labels, enumerate_classes()))


def test_fixed_clip_deterministic():
    sc = sample_scenario(GeneratorConfig(), 4)
    a, b = render_clip(sc), render_clip(sc)
    assert np.array_equal(a.frames, b.frames) and np.array_equal(a.background_masks, b.background_masks)
    assert a.frames.shape == (16, 64, 192, 3) and a.frames.dtype == np.uint8
    assert set(np.unique(a.background_masks)) <= {0, 1}


def test_activity_footprints_cover_executors():
    sc = sample_scenario(_scripted({"pattern": "Z2-Z4:C", "agents": 1}), 0)
    idx = subsample_indices(64, 16)
    fp = activity_footprints(sc, idx)
    assert set(fp) == {"Z2-Z4:C"}
    m = fp["Z2-Z4:C"]
    assert m.shape == (16, 64, 192) and m.any()
    sem_frames = render_frames(sc, idx)[1]
    assert not (m & sem_frames.astype(bool)).any()


def test_config_round_trip():
    cfg = GeneratorConfig(classes=("Z1-Z2:C", "C1-C2:P"), script=({"pattern": "Z1-Z2:C"},))
    assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        GeneratorConfig.from_dict({"bogus": 1})
