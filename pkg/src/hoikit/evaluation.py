"""Role mAP: greedy triplet matching and all-point average precision."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from .geometry import BBox, iou

IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class HoiTriplet:
    image_id: Hashable
    human: BBox
    action: str
    object: Optional[BBox]
    score: float
    human_index: Optional[int] = None
    object_index: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"triplet score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class GtTriplet:
    image_id: Hashable
    human: BBox
    action: str
    object: Optional[BBox]


@dataclass
class EvalResult:
    ap: dict[str, float]
    npos: dict[str, int]
    map_role: float
    # action -> list of (precision, recall, score threshold)
    pr: dict[str, list[tuple[float, float, float]]] = field(default_factory=dict)


def _pair_ious(det: HoiTriplet, gt: GtTriplet) -> Optional[tuple[float, float]]:
    """(human IoU, object IoU) if both clear the threshold, else None."""
    if (det.object is None) != (gt.object is None):
        return None
    h = iou(det.human, gt.human)
    o = 1.0 if gt.object is None else iou(det.object, gt.object)
    if h < IOU_THRESHOLD or o < IOU_THRESHOLD:
        return None
    return h, o


def sort_detections(dets: Sequence[HoiTriplet]) -> list[HoiTriplet]:
    """Descending score; equal scores keep input order."""
    order = sorted(range(len(dets)), key=lambda k: -dets[k].score)
    return [dets[k] for k in order]


def match(dets: Sequence[HoiTriplet], gts: Sequence[GtTriplet], action: str) -> tuple[np.ndarray, int]:
    """Greedy one-to-one matching for one action.

    ``dets`` must already be sorted by descending score.  Among candidate
    GTs a detection takes the one with the highest min(human, object)
    IoU, then the highest IoU sum, then the lowest GT index.
    Returns the TP flags (aligned with the ``action`` detections in order)
    and the number of GTs for the action.
    """
    gts_a = [g for g in gts if g.action == action]
    by_image = defaultdict(list)
    for k, g in enumerate(gts_a):
        by_image[g.image_id].append(k)
    used = np.zeros(len(gts_a), dtype=bool)
    flags = []
    for d in dets:
        if d.action != action:
            continue
        best, best_key = None, None
        for k in by_image.get(d.image_id, ()):
            if used[k]:
                continue
            ious = _pair_ious(d, gts_a[k])
            if ious is None:
                continue
            key = (min(ious), sum(ious), -k)
            if best_key is None or key > best_key:
                best, best_key = k, key
        if best is not None:
            used[best] = True
        flags.append(best is not None)
    return np.array(flags, dtype=bool), len(gts_a)


def precision_recall(tp: np.ndarray, npos: int) -> tuple[np.ndarray, np.ndarray]:
    tp = np.asarray(tp, dtype=bool)
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    prec = ctp / np.maximum(ctp + cfp, 1)
    rec = ctp / npos if npos > 0 else np.zeros_like(ctp, dtype=np.float64)
    return prec, rec


def average_precision(tp: Sequence[bool], npos: int) -> float:
    """All-point interpolated AP (area under the precision envelope)."""
    if npos < 0:
        raise ValueError("npos must be non-negative")
    tp = np.asarray(tp, dtype=bool)
    if npos == 0 or len(tp) == 0:
        return 0.0
    prec, rec = precision_recall(tp, npos)
    mrec = np.concatenate([[0.0], rec, [rec[-1]]])
    mpre = np.concatenate([[0.0], prec, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def map_role(dets: Sequence[HoiTriplet], gts: Sequence[GtTriplet],
             actions: Optional[Sequence[str]] = None) -> EvalResult:
    """Per-action AP and their mean over actions that have ground truth."""
    det_actions = {d.action for d in dets}
    gt_actions = {g.action for g in gts}
    if det_actions and gt_actions and not det_actions & gt_actions:
        raise ValueError("detections and ground truth share no action")
    if actions is None:
        actions = sorted(det_actions | gt_actions)
    ranked = sort_detections(dets)
    ap, npos_map, pr = {}, {}, {}
    for a in actions:
        ranked_a = [d for d in ranked if d.action == a]
        tp, npos = match(ranked_a, gts, a)
        if npos == 0 and len(tp) == 0:
            continue
        ap[a] = average_precision(tp, npos)
        npos_map[a] = npos
        prec, rec = precision_recall(tp, npos)
        pr[a] = [(float(p), float(r), float(d.score)) for p, r, d in zip(prec, rec, ranked_a)]
    scored = [ap[a] for a in ap if npos_map[a] > 0]
    mean = float(np.mean(scored)) if scored else 0.0
    return EvalResult(ap, npos_map, mean, pr)
