"""On-disk synthetic datasets: balanced generation, manifest, lazy loading.

Layout::

    <root>/manifest.json
    <root>/<split>/<clip_id>/frame_%03d.png     RGB, every scenario frame
    <root>/<split>/<clip_id>/bgmask_%03d.png    8-bit, 255 = background
    <root>/<split>/<clip_id>/label.json
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .activity import EGO_ACTIONS, ClassCatalog, encode_multihot
from .scenario import (
    GeneratorConfig,
    InfeasibleConfigError,
    render_frames,
    sample_scenario,
    subsample_indices,
)

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1

__all__ = [
    "DatasetConfig",
    "ClipRecord",
    "ClipDataset",
    "plan_balanced",
    "generate_dataset",
    "regenerate_scenario",
    "load_manifest",
    "config_hash",
]


@dataclass(frozen=True)
class DatasetConfig:
    """Generator settings plus per-split sizes.

    Each split maps to either ``{"n_clips": n}`` or ``{"per_class": n}``.
    """

    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    splits: dict = field(default_factory=lambda: {"train": {"n_clips": 400}, "test": {"n_clips": 100}})
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        gen = GeneratorConfig.from_dict(d.pop("generator", {}))
        splits = d.pop("splits", None) or cls().splits
        seed = int(d.pop("seed", 0))
        if d:
            raise ValueError(f"unknown dataset options: {sorted(d)}")
        return cls(gen, {k: dict(v) for k, v in splits.items()}, seed)

    def to_dict(self) -> dict:
        return {"generator": self.generator.to_dict(), "splits": self.splits, "seed": self.seed}


def config_hash(config: DatasetConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def plan_balanced(
    catalog: ClassCatalog,
    rng: np.random.Generator,
    *,
    n_clips: Optional[int] = None,
    per_class: Optional[int] = None,
    size_range: tuple[int, int] = (1, 4),
    max_attempts: int = 200,
) -> list[list[str]]:
    """Assign catalog classes to clips so every class appears equally often.

    A clip never holds two labels with the same (source, destination, agent)
    pattern. Exactly one of ``n_clips`` / ``per_class`` must be given.
    """
    if (n_clips is None) == (per_class is None):
        raise ValueError("give exactly one of n_clips or per_class")
    n_cls = len(catalog)
    n_patterns = len({a.pattern for a in catalog})
    lo, hi = size_range
    hi = min(hi, n_patterns)
    if lo < 1 or lo > hi:
        raise InfeasibleConfigError(f"activities per clip {size_range} infeasible for this catalog")

    if n_clips is not None:
        if n_clips < 1:
            raise InfeasibleConfigError("n_clips must be positive")
        sizes = rng.integers(lo, hi + 1, size=n_clips)
        total = int(sizes.sum())
        base, rem = divmod(total, n_cls)
        targets = np.full(n_cls, base)
        targets[rng.choice(n_cls, size=rem, replace=False)] += 1
    else:
        if per_class < 1:
            raise InfeasibleConfigError("per_class must be positive")
        total = per_class * n_cls
        sizes = []
        while sum(sizes) < total:
            sizes.append(int(rng.integers(lo, hi + 1)))
        overflow = sum(sizes) - total
        while overflow > 0:
            j = int(np.argmax(sizes))
            cut = min(overflow, sizes[j] - lo) if sizes[j] > lo else 0
            if cut == 0:
                sizes.pop(j)
                overflow = sum(sizes) - total
                continue
            sizes[j] -= cut
            overflow -= cut
        sizes = np.array(sizes)
        targets = np.full(n_cls, per_class)

    pool0 = np.repeat(np.arange(n_cls), targets)
    for _ in range(max_attempts):
        pool = list(rng.permutation(pool0))
        clips = []
        ok = True
        for size in sizes:
            chosen, patterns = [], set()
            rest = []
            for c in pool:
                pat = catalog[int(c)].pattern
                if len(chosen) < size and pat not in patterns:
                    chosen.append(int(c))
                    patterns.add(pat)
                else:
                    rest.append(c)
            if len(chosen) < size:
                ok = False
                break
            clips.append(chosen)
            pool = rest
        if ok and not pool:
            return [[catalog.labels[c] for c in clip] for clip in clips]
    raise InfeasibleConfigError("could not satisfy balance targets without pattern conflicts")


def _clip_seed(seed: int, split_idx: int, i: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(split_idx, i))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _write_clip(split_dir: Path, clip_id: str, scenario, eval_indices) -> None:
    frames, masks = render_frames(scenario)
    tmp = Path(tempfile.mkdtemp(prefix=f".{clip_id}.", dir=split_dir))
    try:
        for t in range(len(frames)):
            Image.fromarray(frames[t]).save(tmp / f"frame_{t:03d}.png")
            Image.fromarray((masks[t] * 255).astype(np.uint8)).save(tmp / f"bgmask_{t:03d}.png")
        meta = {
            "labels": scenario.label_strings,
            "ego_action": scenario.ego_action,
            "seed": scenario.seed,
            "n_frames": scenario.length,
            "frame_indices": [int(i) for i in eval_indices],
        }
        (tmp / "label.json").write_text(json.dumps(meta, indent=1))
        final = split_dir / clip_id
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def generate_dataset(config: DatasetConfig, out_path, seed: Optional[int] = None) -> dict:
    """Generate every split to ``out_path`` and return the manifest."""
    if seed is not None and seed != config.seed:
        config = DatasetConfig(config.generator, config.splits, int(seed))
    root = Path(out_path)
    root.mkdir(parents=True, exist_ok=True)
    gen = config.generator
    catalog = gen.catalog()
    manifest = {
        "version": MANIFEST_VERSION,
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "seed": config.seed,
        "catalog": catalog.labels,
        "catalog_hash": catalog.digest(),
        "splits": {},
        "clips": {},
        "class_counts": {},
        "mean_labels_per_clip": {},
    }
    for split_idx, (split, spec) in enumerate(sorted(config.splits.items())):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(split_idx,)))
        plans = plan_balanced(
            catalog,
            rng,
            n_clips=spec.get("n_clips"),
            per_class=spec.get("per_class"),
            size_range=gen.activities_per_scenario,
        )
        split_dir = root / split
        split_dir.mkdir(exist_ok=True)
        counts = Counter()
        ids = []
        for i, plan in enumerate(plans):
            clip_id = f"{split}_{i:05d}"
            cseed = _clip_seed(config.seed, split_idx, i)
            sc = sample_scenario(gen, cseed, labels=plan)
            if set(sc.label_strings) != set(plan):
                raise RuntimeError(f"{clip_id}: realized labels {sc.label_strings} != plan {plan}")
            _write_clip(split_dir, clip_id, sc, subsample_indices(sc.length, gen.clip_length))
            counts.update(sc.label_strings)
            ids.append(clip_id)
            manifest["clips"][clip_id] = {
                "seed": cseed, "split": split, "labels": sc.label_strings, "plan": list(plan)
            }
        manifest["splits"][split] = ids
        manifest["class_counts"][split] = {lab: counts.get(lab, 0) for lab in catalog.labels}
        manifest["mean_labels_per_clip"][split] = sum(counts.values()) / max(1, len(ids))
        logger.info("%s: %d clips, %.2f labels/clip", split, len(ids), manifest["mean_labels_per_clip"][split])
    _write_json_atomic(root / "manifest.json", manifest)
    return manifest


def _write_json_atomic(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=1, sort_keys=True))
    os.replace(tmp, path)


def load_manifest(root) -> dict:
    path = Path(root) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    return json.loads(path.read_text())


def regenerate_scenario(manifest: dict, clip_id: str):
    """Rebuild a clip's scenario from the seed and plan stored in the manifest."""
    gen = DatasetConfig.from_dict(manifest["config"]).generator
    entry = manifest["clips"][clip_id]
    # the plan order fixes the order of random draws, so it is kept verbatim
    return sample_scenario(gen, entry["seed"], labels=entry["plan"])


@dataclass
class ClipRecord:
    clip_id: str
    path: Path
    labels: list
    ego_action: str
    seed: int
    n_frames: int
    frame_indices: list

    def load(self, indices: Optional[Sequence[int]] = None):
        """``(frames uint8 (T,H,W,3), bg masks uint8 (T,H,W) in {0,1})``."""
        if indices is None:
            indices = self.frame_indices
        frames = np.stack([np.asarray(Image.open(self.path / f"frame_{i:03d}.png").convert("RGB")) for i in indices])
        masks = np.stack([np.asarray(Image.open(self.path / f"bgmask_{i:03d}.png")) for i in indices])
        return frames, (masks > 127).astype(np.uint8)


class ClipDataset(Sequence):
    """Lazily loaded split of an on-disk dataset."""

    def __init__(self, root, split: str):
        self.root = Path(root)
        self.manifest = load_manifest(self.root)
        if split not in self.manifest["splits"]:
            raise KeyError(f"split {split!r} not in dataset (have {sorted(self.manifest['splits'])})")
        self.split = split
        self.catalog = ClassCatalog.from_labels(self.manifest["catalog"])
        gen = self.manifest["config"]["generator"]
        self.clip_length = int(gen["clip_length"])
        self.records = []
        for cid in self.manifest["splits"][split]:
            path = self.root / split / cid
            meta = json.loads((path / "label.json").read_text())
            self.records.append(
                ClipRecord(cid, path, meta["labels"], meta["ego_action"], meta["seed"], meta["n_frames"], meta["frame_indices"])
            )

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def labels(self) -> np.ndarray:
        return np.stack([encode_multihot(r.labels, self.catalog) for r in self.records])

    @property
    def ego_labels(self) -> np.ndarray:
        return np.array([EGO_ACTIONS.index(r.ego_action) for r in self.records])

    @property
    def n_frames(self) -> int:
        return self.records[0].n_frames if self.records else 0
