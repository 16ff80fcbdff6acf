"""Command line: ``action-slot {gen,train,eval,viz}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from .activity import ClassCatalog
from .dataset import ClipRecord, DatasetConfig, generate_dataset
from .estimator import load_checkpoint
from .training import TrainConfig, deterministic_mode, evaluate, load_config_file, train_model
from .scenario import subsample_indices
from .viz import OverlaySpec, render_overlay


def _gen(args):
    cfg = DatasetConfig.from_dict(load_config_file(args.config)) if args.config else DatasetConfig()
    manifest = generate_dataset(cfg, args.out, seed=args.seed)
    for split, ids in manifest["splits"].items():
        print(f"{split}: {len(ids)} clips, {manifest['mean_labels_per_clip'][split]:.2f} labels/clip")
    return 0


def _train(args):
    raw = load_config_file(args.config) if args.config else {}
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = TrainConfig.from_dict(raw)
    if args.deterministic:
        with deterministic_mode():
            ckpt, est = train_model(cfg, args.data, args.out)
    else:
        ckpt, est = train_model(cfg, args.data, args.out)
    print(f"checkpoint: {ckpt} (best epoch {est.best_epoch_} of {est.n_epochs_})")
    return 0


def _eval(args):
    report = evaluate(args.ckpt, args.data, args.split, args.report)
    print(f"mAP {report.map:.4f} over {report.n_samples} clips")
    for key, v in report.slices.items():
        if v is not None:
            print(f"  {key:3s} {v:.4f}")
    return 0


def _load_clip_dir(path: Path):
    """All stored frames of one clip directory."""
    meta = json.loads((path / "label.json").read_text())
    rec = ClipRecord(path.name, path, meta["labels"], meta["ego_action"], meta["seed"], meta["n_frames"], meta["frame_indices"])
    frames, _ = rec.load(range(meta["n_frames"]))
    return frames


def _viz(args):
    est = load_checkpoint(args.ckpt)
    catalog: ClassCatalog = est.catalog_
    frames = _load_clip_dir(Path(args.clip))
    videos = frames[None]
    # the estimator subsamples with the same fixed stride
    shown = frames[subsample_indices(len(frames), est.clip_length, "fixed")]
    att = est.attention_maps(videos)[0]
    if args.classes == "auto":
        spec = OverlaySpec("auto", args.tau)
        selected = spec.resolve(est.predict_proba(videos)[0], len(catalog))
    else:
        names = [s for s in args.classes.split(",") if s.strip()]
        spec = OverlaySpec([catalog.index(n) for n in names], args.tau)
        selected = spec.resolve(None, len(catalog))
    paths = render_overlay(shown, att, selected, catalog.labels, args.out, spec)
    print(f"wrote {len(paths)} overlays for {[catalog.labels[i] for i in selected]} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="action-slot", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--config", help="YAML/JSON dataset config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=_gen)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", help="YAML/JSON training config")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--deterministic", action="store_true", help="single-threaded deterministic kernels")
    t.set_defaults(func=_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--report", default=None)
    e.set_defaults(func=_eval)

    v = sub.add_parser("viz", help="render attention overlays for one clip")
    v.add_argument("--ckpt", required=True)
    v.add_argument("--clip", required=True, help="clip directory of a generated dataset")
    v.add_argument("--classes", default="auto", help="'auto' or comma-separated labels")
    v.add_argument("--tau", type=float, default=0.2)
    v.add_argument("--out", required=True)
    v.set_defaults(func=_viz)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
