import json
from collections import Counter

import numpy as np
import pytest

from action_slot.activity import enumerate_classes
from action_slot.dataset import (
    ClipDataset,
    DatasetConfig,
    config_hash,
    generate_dataset,
    load_manifest,
    plan_balanced,
    regenerate_scenario,
)
from action_slot.scenario import GeneratorConfig, InfeasibleConfigError, render_frames, sample_scenario

SMALL = ("Z1-Z2:C", "Z3-Z1:K+", "C1-C2:P", "C4-C1:P")


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    cfg = DatasetConfig(
        GeneratorConfig(classes=SMALL, activities_per_scenario=(1, 2)),
        {"train": {"n_clips": 6}, "test": {"per_class": 2}},
        seed=11,
    )
    return root, generate_dataset(cfg, root)


def test_plan_per_class_exact():
    cat = enumerate_classes()
    plans = plan_balanced(cat, np.random.default_rng(0), per_class=10)
    counts = Counter(l for p in plans for l in p)
    assert set(counts) == set(cat.labels)
    assert all(9 <= v <= 11 for v in counts.values())
    for p in plans:
        pats = [cat[cat.index(l)].pattern for l in p]
        assert len(set(pats)) == len(pats)


def test_plan_n_clips_balanced():
    cat = enumerate_classes()
    plans = plan_balanced(cat, np.random.default_rng(1), n_clips=300)
    assert len(plans) == 300
    counts = np.array(list(Counter(l for p in plans for l in p).values()))
    assert counts.max() - counts.min() <= 1


def test_plan_errors():
    cat = enumerate_classes()
    with pytest.raises(ValueError):
        plan_balanced(cat, np.random.default_rng(0))
    with pytest.raises(InfeasibleConfigError):
        plan_balanced(cat, np.random.default_rng(0), n_clips=5, size_range=(0, 2))


def test_balanced_plans_realize(small_dataset):
    root, manifest = small_dataset
    for cid, entry in manifest["clips"].items():
        meta = json.loads((root / entry["split"] / cid / "label.json").read_text())
        assert meta["labels"] == entry["labels"]
    assert all(v == 2 for v in manifest["class_counts"]["test"].values())


def test_layout_and_manifest(small_dataset):
    root, manifest = small_dataset
    assert load_manifest(root) == json.loads(json.dumps(manifest))
    assert manifest["catalog"] == list(SMALL)
    assert manifest["config_hash"] == config_hash(DatasetConfig.from_dict(manifest["config"]))
    clip = root / "train" / manifest["splits"]["train"][0]
    names = sorted(p.name for p in clip.iterdir())
    assert "label.json" in names
    assert sum(n.startswith("frame_") for n in names) == 64
    assert sum(n.startswith("bgmask_") for n in names) == 64
    meta = json.loads((clip / "label.json").read_text())
    assert meta["frame_indices"] == list(range(0, 64, 4))
    assert set(meta) == {"labels", "ego_action", "seed", "n_frames", "frame_indices"}
    assert not [p for p in (root / "train").iterdir() if p.name.startswith(".")]


def test_regeneration_bitwise(small_dataset):
    root, manifest = small_dataset
    data = ClipDataset(root, "train")
    for rec in data.records[:3]:
        sc = regenerate_scenario(manifest, rec.clip_id)
        frames, masks = render_frames(sc, range(64))
        disk_frames, disk_masks = rec.load(range(64))
        assert np.array_equal(frames, disk_frames)
        assert np.array_equal(masks, disk_masks)


def test_generation_deterministic(small_dataset, tmp_path):
    root, manifest = small_dataset
    again = generate_dataset(DatasetConfig.from_dict(manifest["config"]), tmp_path)
    assert again == manifest
    cid = manifest["splits"]["test"][0]
    for name in ("frame_007.png", "bgmask_033.png", "label.json"):
        assert (root / "test" / cid / name).read_bytes() == (tmp_path / "test" / cid / name).read_bytes()


def test_clip_dataset(small_dataset):
    root, _ = small_dataset
    data = ClipDataset(root, "test")
    assert len(data) >= 4 and data.clip_length == 16 and data.n_frames == 64
    assert data.labels.shape == (len(data), 4) and data.labels.sum(1).min() >= 1
    assert data.ego_labels.min() >= 0 and data.ego_labels.max() <= 3
    frames, masks = data[0].load()
    assert frames.shape == (16, 64, 192, 3) and masks.shape == (16, 64, 192)
    with pytest.raises(KeyError):
        ClipDataset(root, "val")
    with pytest.raises(FileNotFoundError):
        ClipDataset(root / "missing", "test")


def test_config_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        DatasetConfig.from_dict({"splits": {}, "bogus": 1})


def test_sample_from_plan_matches_plan():
    cat = enumerate_classes()
    plans = plan_balanced(cat, np.random.default_rng(3), n_clips=20)
    for i, plan in enumerate(plans):
        assert sample_scenario(GeneratorConfig(), i, labels=plan).label_strings == sorted(plan)
