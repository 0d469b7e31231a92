"""End-to-end wiring: pair encoding, scoring, fusion, selection, regrouping."""

from __future__ import annotations

import logging
import zlib
from typing import Optional, Sequence

import numpy as np

from .config import Config, ValidationError
from .evaluation import HoiTriplet
from .formats import AnnotationFile, DetectionFile, DetectionRecord
from .geometry import BBox, generate_human_parts, generate_object_parts, iou, rasterize, union_box
from .head import HeadConfig, HeadParams, PairBatch, PairLabels, forward
from .regroup import ActionPrior, RegroupConfig, ScoreTensor, exclusive_flags, exclusive_regroup
from .spatial import make_coord_map, offset_maps, roi_crop, spatial_stack

log = logging.getLogger(__name__)


def _stable_seed(*parts) -> list[int]:
    return [zlib.crc32(str(p).encode()) for p in parts]


def category_embedding(category: str, channels: int) -> np.ndarray:
    return np.random.default_rng(_stable_seed("category", category)).normal(size=channels).astype(np.float32)


def synthetic_feature_map(rec: DetectionRecord, channels: int, seed: int = 0) -> np.ndarray:
    """Stand-in backbone output, (channels, height, width) float32.

    Low-amplitude noise plus a per-category embedding painted over each
    instance's mask (its box when no segmentation is given).  Fully
    determined by the record and ``seed``.
    """
    rng = np.random.default_rng(_stable_seed(seed, rec.image_id))
    phi = (0.05 * rng.standard_normal((channels, rec.height, rec.width))).astype(np.float32)
    frame = BBox(0, 0, rec.width, rec.height)
    for inst in sorted(rec.instances, key=lambda i: -i.box.area):
        if inst.segmentation is not None:
            region = rasterize(inst.segmentation, frame).bits.astype(bool)
        else:
            region = np.zeros((rec.height, rec.width), dtype=bool)
            b = inst.box
            region[max(int(b.y1), 0):max(int(np.ceil(b.y2)), 0), max(int(b.x1), 0):max(int(np.ceil(b.x2)), 0)] = True
        phi[:, region] += category_embedding(inst.category, channels)[:, None]
    return phi


def _safe_crop(fmap, box: BBox, P: int) -> Optional[np.ndarray]:
    try:
        return roi_crop(fmap, box, P).ravel()
    except ValueError:
        return None


def encode_pairs(rec: DetectionRecord, cfg: Config, head_cfg: HeadConfig,
                 phi: Optional[np.ndarray] = None) -> tuple[PairBatch, list[tuple[int, int]]]:
    """Encode every (human, object) pair of one image.

    Returns the batch and the (human id, object id) of each row, humans
    major.
    """
    humans, objects = rec.humans(cfg.human_category), rec.objects(cfg.human_category)
    pairs = [(h, o) for h in humans for o in objects]
    if not pairs:
        return PairBatch.zeros(head_cfg, 0), []
    if phi is None:
        phi = synthetic_feature_map(rec, head_cfg.feat_channels, cfg.seed)
    if phi.shape[0] != head_cfg.feat_channels:
        raise ValidationError(f"feature map has {phi.shape[0]} channels, head expects {head_cfg.feat_channels}")
    coord = make_coord_map(rec.height, rec.width)
    Dh, Dp = head_cfg.holistic_res, head_cfg.part_res

    human_parts = {}
    for h in humans:
        if cfg.use_pose and h.keypoints is None:
            raise ValidationError(f"image {rec.image_id!r}: human {h.id} has no keypoints (disable use_pose)")
        if cfg.use_pose:
            human_parts[h.id] = generate_human_parts(h.keypoints, h.box, cfg.part_ratio)
    object_parts = {}
    for o in objects:
        if cfg.use_object_parts:
            if o.segmentation is None:
                raise ValidationError(
                    f"image {rec.image_id!r}: object {o.id} has no segmentation (disable use_object_parts)")
            mask = rasterize(o.segmentation, o.box)
            object_parts[o.id] = generate_object_parts(mask, o.box, cfg.grid_size, cfg.min_ratio, cfg.part_ratio)

    batch = PairBatch.zeros(head_cfg, len(pairs))
    for n, (h, o) in enumerate(pairs):
        batch.human[n] = roi_crop(phi, h.box, Dh).ravel()
        batch.object[n] = roi_crop(phi, o.box, Dh).ravel()
        batch.union[n] = roi_crop(phi, union_box(h.box, o.box), Dh).ravel()
        batch.spatial[n] = spatial_stack(h.box, o.box, h.keypoints if cfg.use_pose else None,
                                         head_cfg.spatial_size).ravel()
        om = offset_maps(coord, h.box, o.box, cfg.normalize_offsets)
        batch.object_app[n] = roi_crop(phi, o.box, Dp).ravel()
        batch.object_coord[n] = roi_crop(om.ho, o.box, Dp).ravel()
        batch.human_coord[n] = roi_crop(om.oh, h.box, Dp).ravel()
        if cfg.use_pose:
            hp = human_parts[h.id]
            for k, (box, ok) in enumerate(zip(hp.part_boxes, hp.flags)):
                app = _safe_crop(phi, box, Dp) if ok else None
                if app is None:
                    continue
                batch.part_app[n, k] = app
                batch.part_coord[n, k] = roi_crop(om.ho, box, Dp).ravel()
                batch.part_valid[n, k] = 1.0
        if cfg.use_object_parts:
            op = object_parts[o.id]
            for k, box in enumerate(op.part_boxes):
                crop = _safe_crop(om.oh, box, Dp) if box is not None else None
                if crop is None:
                    continue
                batch.object_part_coord[n, k] = crop
                batch.object_part_valid[n, k] = 1.0
    return batch, [(h.id, o.id) for h, o in pairs]


def score_image(rec: DetectionRecord, cfg: Config, num_actions: int,
                params: Optional[HeadParams] = None) -> ScoreTensor:
    """Per-pair scores for one image, from the head or the record's precomputed pair scores."""
    humans, objects = rec.humans(cfg.human_category), rec.objects(cfg.human_category)
    nh, no = len(humans), len(objects)
    if params is not None:
        batch, _ = encode_pairs(rec, cfg, params.config)
        s = forward(batch, params)
        action = s.action.reshape(nh, no, num_actions)
        inter = s.interactiveness.reshape(nh, no)
    else:
        action = np.zeros((nh, no, num_actions))
        inter = np.zeros((nh, no))
        for i, h in enumerate(humans):
            for j, o in enumerate(objects):
                if (h.id, o.id) not in rec.pair_scores:
                    raise ValidationError(
                        f"image {rec.image_id!r}: no head parameters and no pair scores for ({h.id}, {o.id})")
                act, s_i = rec.pair_scores[(h.id, o.id)]
                action[i, j] = act
                inter[i, j] = s_i
    return ScoreTensor(action, inter, [h.score for h in humans], [o.score for o in objects])


def run_inference(detections: DetectionFile, params: Optional[HeadParams], actions: Sequence[str],
                  prior: dict[str, ActionPrior], cfg: Config = Config()) -> list[HoiTriplet]:
    """Score, fuse, max-object select and (optionally) regroup every image.

    Without ``params`` the records' precomputed pair scores are used.
    """
    if params is not None and params.config.num_actions != len(actions):
        raise ValidationError("parameter file and action vocabulary disagree")
    flags = exclusive_flags(prior, actions) if cfg.regroup else [False] * len(actions)
    rcfg = RegroupConfig(cfg.s_min, cfg.beta)
    out = []
    for rec in detections.images:
        humans, objects = rec.humans(cfg.human_category), rec.objects(cfg.human_category)
        if not humans or not objects:
            continue
        S = score_image(rec, cfg, len(actions), params)
        for pa in exclusive_regroup(S, flags, rcfg):
            h, o = humans[pa.human], objects[pa.object]
            out.append(HoiTriplet(rec.image_id, h.box, actions[pa.action], o.box, pa.score, h.id, o.id))
    return out


def label_pairs(rec: DetectionRecord, pairs: Sequence[tuple[int, int]], ann, actions: Sequence[str]) -> np.ndarray:
    """Multi-hot targets: a proposal pair takes action a when both boxes reach IoU 0.5 with a GT pair for a."""
    inst = {i.id: i for i in rec.instances}
    y = np.zeros((len(pairs), len(actions)))
    if ann is None:
        return y
    index = {a: k for k, a in enumerate(actions)}
    for n, (hid, oid) in enumerate(pairs):
        hb, ob = inst[hid].box, inst[oid].box
        for gh, a, go in ann.triplets:
            if go is None:
                continue
            if iou(hb, ann.instances[gh][1]) >= 0.5 and iou(ob, ann.instances[go][1]) >= 0.5:
                y[n, index[a]] = 1.0
    return y


def build_training_set(detections: DetectionFile, annotations: AnnotationFile, cfg: Config,
                       head_cfg: HeadConfig) -> tuple[PairBatch, PairLabels]:
    by_id = {a.image_id: a for a in annotations.images}
    batches, ys = [], []
    for rec in detections.images:
        batch, pairs = encode_pairs(rec, cfg, head_cfg)
        if not pairs:
            continue
        batches.append(batch)
        ys.append(label_pairs(rec, pairs, by_id.get(rec.image_id), annotations.actions))
    if not batches:
        raise ValidationError("no human-object pairs to train on")
    return PairBatch.concat(batches), PairLabels(np.concatenate(ys))

