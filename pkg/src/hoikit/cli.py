"""Command line entry point.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import formats
from .config import Config, ValidationError
from .evaluation import map_role
from .head import PairBatch, forward, pair_accuracy, train_toy
from .pipeline import build_training_set, encode_pairs, run_inference
from .regroup import compute_exclusive_prior
from .scenes import SceneSpec, generate_scenes
from .visualize import write_overlays

log = logging.getLogger("hoikit")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


def _config(args) -> Config:
    overrides = {
        "human_threshold": getattr(args, "human_threshold", None),
        "object_threshold": getattr(args, "object_threshold", None),
        "s_min": getattr(args, "s_min", None),
        "beta": getattr(args, "beta", None),
        "steps": getattr(args, "steps", None),
        "lr": getattr(args, "lr", None),
        "seed": getattr(args, "seed", None),
    }
    if getattr(args, "no_regroup", False):
        overrides["regroup"] = False
    return Config.load(args.config, **overrides)


def _load_dets(path, cfg: Config) -> formats.DetectionFile:
    return formats.load_detections(path, cfg.human_threshold, cfg.object_threshold, cfg.human_category)


def cmd_prior(args) -> None:
    cfg = _config(args)
    ann = formats.load_annotations(args.annotations)
    prior = compute_exclusive_prior(ann.prior_tuples(), cfg.beta, ann.actions)
    formats.write_json(args.output, formats.prior_to_dict(prior))
    n_excl = sum(p.exclusive for p in prior.values())
    log.info("%d of %d actions are object-exclusive", n_excl, len(prior))


def cmd_encode(args) -> None:
    cfg = _config(args)
    dets = _load_dets(args.detections, cfg)
    head_cfg = cfg.head_config(num_actions=max(len(dets.actions), 1))
    rows, pairs = [], []
    for rec in dets.images:
        batch, ids = encode_pairs(rec, cfg, head_cfg)
        if ids:
            rows.append(batch)
            pairs += [{"image_id": rec.image_id, "human": h, "object": o} for h, o in ids]
    batch = PairBatch.concat(rows) if rows else PairBatch.zeros(head_cfg, 0)
    layout, offset, flat = {}, 0, []
    for f in fields(PairBatch):
        arr = getattr(batch, f.name)
        width = int(np.prod(arr.shape[1:]))
        layout[f.name] = {"offset": offset, "shape": list(arr.shape[1:])}
        offset += width
        flat.append(arr.reshape(len(batch), width))
    matrix = np.concatenate(flat, axis=1) if flat else np.zeros((0, 0))
    formats.write_tensors(args.output, {"pairs": matrix}, {
        "kind": "encoded_pairs", "layout": layout, "pairs": pairs, "head_config": head_cfg.to_dict()})
    log.info("encoded %d pairs, %d floats each", len(batch), offset)


def cmd_train_toy(args) -> None:
    cfg = _config(args)
    dets = _load_dets(args.detections, cfg)
    ann = formats.load_annotations(args.annotations)
    head_cfg = cfg.head_config(len(ann.actions))
    batch, labels = build_training_set(dets, ann, cfg, head_cfg)
    log.info("training on %d pairs (%d positive)", len(batch), int(labels.z.sum()))
    params = train_toy(batch, labels, head_cfg, cfg.train_config())
    acc = pair_accuracy(forward(batch, params), labels)
    formats.save_params(args.output, params, ann.actions, {"train_accuracy": acc, "config": cfg.to_dict()})
    log.info("training accuracy %.3f", acc)


def cmd_infer(args) -> None:
    cfg = _config(args)
    dets = _load_dets(args.detections, cfg)
    if args.params:
        params, actions = formats.load_params(args.params)
    else:
        params, actions = None, dets.actions
        if not actions:
            raise ValidationError("no --params given and the detections carry no pair scores")
    prior = formats.load_prior(args.prior) if args.prior else {}
    if cfg.regroup and not args.prior:
        raise ValidationError("regrouping needs --prior (or pass --no-regroup)")
    triplets = run_inference(dets, params, actions, prior, cfg)
    formats.write_json(args.output, formats.triplets_to_dict(triplets, actions))
    log.info("wrote %d triplets", len(triplets))


def cmd_eval(args) -> None:
    triplets, _ = formats.load_triplets(args.detections)
    ann = formats.load_annotations(args.annotations)
    res = map_role(triplets, ann.gt_triplets())
    formats.write_json(args.output, formats.eval_to_dict(res))
    if args.pr_csv:
        formats.write_pr_csv(args.pr_csv, res)
    print(f"mAP_role {res.map_role:.4f}")
    for a in sorted(res.ap):
        print(f"  {a:<24} AP {res.ap[a]:.4f}  (npos {res.npos[a]})")


def cmd_visualize(args) -> None:
    triplets, _ = formats.load_triplets(args.detections)
    dets = formats.parse_detections(formats.read_json(args.images))
    written = write_overlays(args.output, triplets, dets, args.min_score)
    log.info("wrote %d overlays to %s", len(written), args.output)


def cmd_gen_scenes(args) -> None:
    with open(args.spec) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{args.spec}: {e}") from None
    spec = SceneSpec.from_dict(data)
    dets, ann = generate_scenes(spec, args.seed)
    out = Path(args.output)
    formats.write_json(out / "detections.json", formats.detections_to_dict(dets))
    formats.write_json(out / "annotations.json", formats.annotations_to_dict(ann))
    log.info("wrote %d scenes to %s", len(dets.images), out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hoikit", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        sp.add_argument("--config", help="JSON config; flags override its keys")
        return sp

    sp = add("prior", cmd_prior, "exclusive-object prior from annotations")
    sp.add_argument("annotations")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--beta", type=float)

    sp = add("encode", cmd_encode, "encode every human-object pair to a tensor file")
    sp.add_argument("detections")
    sp.add_argument("-o", "--output", required=True)

    sp = add("train-toy", cmd_train_toy, "train the head on encoded pairs")
    sp.add_argument("detections")
    sp.add_argument("annotations")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--seed", type=int)

    sp = add("infer", cmd_infer, "score, select and regroup HOI triplets")
    sp.add_argument("detections")
    sp.add_argument("--params", help="head parameters; omit to use precomputed pair scores")
    sp.add_argument("--prior")
    sp.add_argument("--no-regroup", action="store_true")
    sp.add_argument("--s-min", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("-o", "--output", required=True)

    sp = add("eval", cmd_eval, "role mAP of HOI detections")
    sp.add_argument("detections")
    sp.add_argument("annotations")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--pr-csv")

    sp = add("visualize", cmd_visualize, "SVG overlays per image")
    sp.add_argument("detections", help="HOI detections from infer")
    sp.add_argument("images", help="the detection file (image sizes)")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--min-score", type=float, default=0.0)

    sp = add("gen-scenes", cmd_gen_scenes, "generate synthetic crowded scenes")
    sp.add_argument("spec")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--seed", type=int)

    for name in ("encode", "train-toy", "infer"):
        sp = sub.choices[name]
        sp.add_argument("--human-threshold", type=float)
        sp.add_argument("--object-threshold", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ValueError as e:  # ValidationError and invariant violations
        log.error("%s", e)
        return EXIT_VALIDATION
    except OSError as e:
        log.error("%s", e)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
