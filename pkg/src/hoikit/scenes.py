"""Synthetic crowded scenes and training fixtures.

Each scene places 2+ people side by side, each standing on their own
pair of skis (the exclusive action), all looking at one shared kite
(the sharable action), plus optional distractor benches.  Pair scores
come from an oracle scorer; corruption raises a person's score for a
neighbour's skis above their own, which is the mis-grouping case.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .config import ValidationError
from .formats import AnnotationFile, AnnotationRecord, DetectionFile, DetectionRecord, Instance
from .geometry import BBox, KeypointSet, PolygonMask
from .head import HeadConfig, PairBatch, PairLabels

EXCLUSIVE_ACTION = "ski-instr"
SHARED_ACTION = "look-obj"
ACTIONS = [EXCLUSIVE_ACTION, SHARED_ACTION]
CATEGORIES = ["person", "skis", "kite", "bench"]

# standing pose, fractions of the person box
KEYPOINT_TEMPLATE = np.array([
    (0.50, 0.08), (0.55, 0.06), (0.45, 0.06), (0.60, 0.08), (0.40, 0.08),
    (0.70, 0.22), (0.30, 0.22), (0.80, 0.38), (0.20, 0.38), (0.85, 0.52),
    (0.15, 0.52), (0.62, 0.55), (0.38, 0.55), (0.64, 0.75), (0.36, 0.75),
    (0.65, 0.95), (0.35, 0.95),
])

COLUMN = 40
MARGIN = 10
HEIGHT = 140


@dataclass(frozen=True)
class SceneSpec:
    num_scenes: int = 10
    min_humans: int = 2
    max_humans: int = 4
    # skis per scene; None means one per person
    exclusive_objects: int | None = None
    max_distractors: int = 1
    corruption: float = 0.5
    invisible_keypoint_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.num_scenes < 0 or not 1 <= self.min_humans <= self.max_humans:
            raise ValidationError("bad scene counts")
        if not 0 <= self.corruption <= 1:
            raise ValidationError("corruption must lie in [0, 1]")
        if self.exclusive_objects is not None and self.exclusive_objects < self.max_humans:
            raise ValidationError(
                f"infeasible: {self.max_humans} exclusive pairs need as many objects, got {self.exclusive_objects}")

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        known = {f.name for f in fields(cls)}
        if set(data) - known:
            raise ValidationError(f"unknown scene spec keys: {sorted(set(data) - known)}")
        return cls(**data)


def _r(x: float) -> float:
    """Round to 1/8 pixel so box arithmetic stays exact."""
    return round(x * 8) / 8


def _skis_polygons(box: BBox) -> tuple:
    """Two slanted boards filling the left and right thirds of the box."""
    x1, y1, x2, y2 = box.as_list()
    w = x2 - x1
    left = [x1, y1, x1 + w / 3, y1, x1 + w / 3 + 1, y2, x1 + 1, y2]
    right = [x2 - w / 3 - 1, y1, x2 - 1, y1, x2, y2, x2 - w / 3, y2]
    return (tuple(left), tuple(right))


def _diamond(box: BBox) -> tuple:
    cx, cy = box.center
    return ((cx, box.y1, box.x2, cy, cx, box.y2, box.x1, cy),)


def _rect(box: BBox) -> tuple:
    return ((box.x1, box.y1, box.x2, box.y1, box.x2, box.y2, box.x1, box.y2),)


def _jitter(rng, box: BBox, score: float) -> BBox:
    d = rng.uniform(-0.5, 0.5, size=4)
    return BBox(_r(box.x1 + d[0]), _r(box.y1 + d[1]), _r(box.x2 + d[2]), _r(box.y2 + d[3]), score=score)


def _scene(rng, spec: SceneSpec, index: int):
    nh = int(rng.integers(spec.min_humans, spec.max_humans + 1))
    width = 2 * MARGIN + COLUMN * nh
    gt_boxes: dict[int, tuple[str, BBox]] = {}
    humans, skis = [], []
    for i in range(nh):
        x1 = MARGIN + COLUMN * i + _r(rng.uniform(5, 8))
        w = _r(rng.uniform(24, 28))
        y1 = _r(rng.uniform(30, 36))
        h = _r(rng.uniform(70, 78))
        hb = BBox(x1, y1, x1 + w, y1 + h)
        sb = BBox(_r(x1 - 3), _r(y1 + h - 4), _r(x1 + w + 3), _r(y1 + h + 8))
        humans.append(i)
        skis.append(nh + i)
        gt_boxes[i] = ("person", hb)
        gt_boxes[nh + i] = ("skis", sb)
    kite_id = 2 * nh
    kx = _r(rng.uniform(MARGIN, width - MARGIN - 16))
    gt_boxes[kite_id] = ("kite", BBox(kx, 4, kx + 16, 24))
    n_dist = int(rng.integers(0, spec.max_distractors + 1))
    for d in range(n_dist):
        bx = _r(rng.uniform(0, width - 30))
        gt_boxes[kite_id + 1 + d] = ("bench", BBox(bx, 100, bx + 30, 112))
    image_id = f"scene{index:04d}"

    triplets = [(i, EXCLUSIVE_ACTION, nh + i) for i in range(nh)]
    triplets += [(i, SHARED_ACTION, kite_id) for i in range(nh)]
    ann = AnnotationRecord(image_id, gt_boxes, triplets, width, HEIGHT)

    instances = []
    det_score = {}
    for iid, (cat, box) in gt_boxes.items():
        score = _r(rng.uniform(0.95, 1.0) * 64) / 64
        det_score[iid] = score
        db = _jitter(rng, box, score)
        kps = seg = None
        if cat == "person":
            pts = np.array([db.x1, db.y1]) + KEYPOINT_TEMPLATE * np.array([db.width, db.height])
            vis = rng.random(17) >= spec.invisible_keypoint_rate
            kps = KeypointSet(np.round(pts * 8) / 8, vis)
        elif cat == "skis":
            seg = PolygonMask(_skis_polygons(db))
        elif cat == "kite":
            seg = PolygonMask(_diamond(db))
        else:
            seg = PolygonMask(_rect(db))
        instances.append(Instance(iid, cat, db, kps, seg))

    objects = [iid for iid, (cat, _) in gt_boxes.items() if cat != "person"]
    fused = {}  # (h, o, action index) -> target fused score
    inter = {}
    for i in humans:
        for o in objects:
            own = o == skis[i] or o == kite_id
            inter[(i, o)] = rng.uniform(0.97, 1.0) if own else rng.uniform(0.05, 0.5)
            for a in range(len(ACTIONS)):
                fused[(i, o, a)] = rng.uniform(0.0, 0.1) * inter[(i, o)] * det_score[i] * det_score[o]
        fused[(i, skis[i], 0)] = rng.uniform(0.3, 0.85)
        fused[(i, kite_id, 1)] = rng.uniform(0.3, 0.85)

    # corruption: a victim j scores a neighbour i's skis between its own and i's
    true = {i: fused[(i, skis[i], 0)] for i in humans}
    victims, targets = set(), set()
    for j in rng.permutation(nh):
        j = int(j)
        if rng.random() >= spec.corruption or j in targets:
            continue
        options = [i for i in humans if true[i] > true[j] and i not in victims and i not in targets and i != j]
        if not options:
            continue
        i = options[int(rng.integers(len(options)))]
        victims.add(j)
        targets.add(i)
        inter[(j, skis[i])] = rng.uniform(0.97, 1.0)
        fused[(j, skis[i], 0)] = true[j] + (true[i] - true[j]) * rng.uniform(0.2, 0.8)

    pair_scores = {}
    for i in humans:
        for o in objects:
            cap = inter[(i, o)] * det_score[i] * det_score[o]
            act = tuple(float(min(fused[(i, o, a)] / cap, 1.0)) for a in range(len(ACTIONS)))
            pair_scores[(i, o)] = (act, float(inter[(i, o)]))
    det = DetectionRecord(image_id, width, HEIGHT, instances, pair_scores)
    return det, ann


def generate_scenes(spec: SceneSpec, seed: int | None = None) -> tuple[DetectionFile, AnnotationFile]:
    """Reproducible detections (with oracle pair scores) and ground truth."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    dets, anns = [], []
    for k in range(spec.num_scenes):
        d, a = _scene(rng, spec, k)
        dets.append(d)
        anns.append(a)
    return DetectionFile(list(CATEGORIES), dets, list(ACTIONS)), AnnotationFile(list(ACTIONS), anns)


def separable_pairs(cfg: HeadConfig, n: int, seed: int = 0, margin: float = 0.25) -> tuple[PairBatch, PairLabels]:
    """Random pair features whose labels are nested half-spaces of the human input.

    Action a is on when the projection on a fixed direction exceeds
    ``a``; pairs within ``margin`` of any threshold are rejected.
    """
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(cfg.holistic_in)
    direction /= np.linalg.norm(direction)
    thresholds = np.arange(cfg.num_actions, dtype=np.float64)
    keep = []
    proj = []
    while len(keep) < n:
        x = rng.standard_normal(cfg.holistic_in)
        t = x @ direction
        if np.all(np.abs(t - thresholds) > margin):
            keep.append(x)
            proj.append(t)
    batch = PairBatch(**{k: rng.standard_normal(s) for k, s in PairBatch.shapes_for(cfg, n).items()})
    batch.human = np.array(keep)
    batch.part_valid = (rng.random(batch.part_valid.shape) > 0.2).astype(np.float64)
    batch.object_part_valid = (rng.random(batch.object_part_valid.shape) > 0.3).astype(np.float64)
    batch.part_app *= batch.part_valid[:, :, None]
    batch.part_coord *= batch.part_valid[:, :, None]
    batch.object_part_coord *= batch.object_part_valid[:, :, None]
    y = (np.array(proj)[:, None] > thresholds[None, :]).astype(np.float64)
    return batch, PairLabels(y)
