"""JSON record formats and the flat float32 tensor container.

Tensor container (``.bin``), all little-endian::

    b"HOIT" | u32 version | u32 count | count x (u32 ndim | ndim x u32 dim | float32 data)

A JSON sidecar (same path, ``.json`` suffix) names the tensors and
carries any layout or model metadata.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .config import ValidationError
from .evaluation import EvalResult, GtTriplet, HoiTriplet
from .geometry import BBox, KeypointSet, PolygonMask
from .head import HeadConfig, HeadParams
from .regroup import ActionPrior

MAGIC = b"HOIT"
VERSION = 1


# ---------------------------------------------------------------------------
# detections


@dataclass
class Instance:
    id: int
    category: str
    box: BBox
    keypoints: Optional[KeypointSet] = None
    segmentation: Optional[PolygonMask] = None

    @property
    def score(self) -> float:
        return self.box.score


@dataclass
class DetectionRecord:
    image_id: str
    width: int
    height: int
    instances: list[Instance]
    # (human id, object id) -> (action scores, interactiveness)
    pair_scores: dict[tuple[int, int], tuple[tuple[float, ...], float]] = field(default_factory=dict)

    def humans(self, human_category: str = "person") -> list[Instance]:
        return [i for i in self.instances if i.category == human_category]

    def objects(self, human_category: str = "person") -> list[Instance]:
        return [i for i in self.instances if i.category != human_category]


@dataclass
class DetectionFile:
    categories: list[str]
    images: list[DetectionRecord]
    actions: list[str] = field(default_factory=list)


def _box(raw: Any, score: float, where: str) -> BBox:
    try:
        vals = [float(v) for v in raw]
        if len(vals) != 4:
            raise ValueError("bbox needs 4 numbers")
        return BBox(*vals, score=float(score))
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{where}: {e}") from None


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ValidationError(f"{where}: missing {key!r}")
    return d[key]


def parse_detections(data: dict) -> DetectionFile:
    categories = list(_require(data, "categories", "detections"))
    actions = list(data.get("actions", []))
    images = []
    for n, img in enumerate(_require(data, "images", "detections")):
        where = f"images[{n}]"
        image_id = str(_require(img, "image_id", where))
        width, height = int(_require(img, "width", where)), int(_require(img, "height", where))
        if width < 1 or height < 1:
            raise ValidationError(f"{where}: image size must be positive")
        instances = []
        seen = set()
        for m, inst in enumerate(_require(img, "instances", where)):
            iw = f"{where} (image {image_id!r}).instances[{m}]"
            iid = int(_require(inst, "id", iw))
            if iid in seen:
                raise ValidationError(f"{iw}: duplicate instance id {iid}")
            seen.add(iid)
            cat = _require(inst, "category", iw)
            if cat not in categories:
                raise ValidationError(f"{iw}: unknown category {cat!r}")
            score = inst.get("score", 1.0)
            box = _box(_require(inst, "bbox", iw), score, iw)
            kps = None
            if inst.get("keypoints") is not None:
                try:
                    kps = KeypointSet.from_triples(inst["keypoints"])
                except ValueError as e:
                    raise ValidationError(f"{iw}: keypoints: {e}") from None
            seg = None
            if inst.get("segmentation") is not None:
                try:
                    seg = PolygonMask(tuple(inst["segmentation"]))
                except (TypeError, ValueError) as e:
                    raise ValidationError(f"{iw}: segmentation: {e}") from None
            instances.append(Instance(iid, cat, box, kps, seg))
        pair_scores = {}
        for m, ps in enumerate(img.get("pair_scores", [])):
            pw = f"{where}.pair_scores[{m}]"
            key = (int(_require(ps, "human", pw)), int(_require(ps, "object", pw)))
            if key[0] not in seen or key[1] not in seen:
                raise ValidationError(f"{pw}: references unknown instance")
            act = tuple(float(v) for v in _require(ps, "action_scores", pw))
            if len(act) != len(actions):
                raise ValidationError(f"{pw}: expected {len(actions)} action scores")
            pair_scores[key] = (act, float(_require(ps, "interactiveness", pw)))
        images.append(DetectionRecord(image_id, width, height, instances, pair_scores))
    return DetectionFile(categories, images, actions)


def detections_to_dict(df: DetectionFile) -> dict:
    images = []
    for rec in df.images:
        insts = []
        for inst in rec.instances:
            d = {"id": inst.id, "category": inst.category, "bbox": inst.box.as_list(), "score": inst.score}
            if inst.keypoints is not None:
                d["keypoints"] = inst.keypoints.to_triples()
            if inst.segmentation is not None:
                d["segmentation"] = [list(p) for p in inst.segmentation.polygons]
            insts.append(d)
        img = {"image_id": rec.image_id, "width": rec.width, "height": rec.height, "instances": insts}
        if rec.pair_scores:
            img["pair_scores"] = [
                {"human": h, "object": o, "action_scores": list(act), "interactiveness": inter}
                for (h, o), (act, inter) in rec.pair_scores.items()
            ]
        images.append(img)
    out = {"categories": list(df.categories), "images": images}
    if df.actions:
        out["actions"] = list(df.actions)
    return out


def filter_record(rec: DetectionRecord, human_threshold: float = 0.5, object_threshold: float = 0.4,
                  human_category: str = "person") -> DetectionRecord:
    """Keep humans scoring above ``human_threshold`` and objects above ``object_threshold``."""
    kept = [i for i in rec.instances
            if i.score > (human_threshold if i.category == human_category else object_threshold)]
    ids = {i.id for i in kept}
    pairs = {k: v for k, v in rec.pair_scores.items() if k[0] in ids and k[1] in ids}
    return DetectionRecord(rec.image_id, rec.width, rec.height, kept, pairs)


def read_json(path) -> Any:
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: invalid JSON: {e}") from None


def write_json(path, data: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=1)


def load_detections(path, human_threshold: float = 0.5, object_threshold: float = 0.4,
                    human_category: str = "person") -> DetectionFile:
    df = parse_detections(read_json(path))
    df.images = [filter_record(r, human_threshold, object_threshold, human_category) for r in df.images]
    return df


# ---------------------------------------------------------------------------
# annotations


@dataclass
class AnnotationRecord:
    image_id: str
    instances: dict[int, tuple[str, BBox]]
    triplets: list[tuple[int, str, Optional[int]]]  # (human id, action, object id)
    width: Optional[int] = None
    height: Optional[int] = None

    def gt_triplets(self) -> list[GtTriplet]:
        out = []
        for h, a, o in self.triplets:
            out.append(GtTriplet(self.image_id, self.instances[h][1], a,
                                 None if o is None else self.instances[o][1]))
        return out


@dataclass
class AnnotationFile:
    actions: list[str]
    images: list[AnnotationRecord]

    def gt_triplets(self) -> list[GtTriplet]:
        return [g for rec in self.images for g in rec.gt_triplets()]

    def prior_tuples(self) -> Iterable[tuple]:
        for rec in self.images:
            for h, a, o in rec.triplets:
                yield rec.image_id, h, a, o


def parse_annotations(data: dict) -> AnnotationFile:
    actions = list(_require(data, "actions", "annotations"))
    images = []
    for n, img in enumerate(_require(data, "images", "annotations")):
        where = f"images[{n}]"
        image_id = str(_require(img, "image_id", where))
        instances = {}
        for m, inst in enumerate(_require(img, "instances", where)):
            iw = f"{where}.instances[{m}]"
            iid = int(_require(inst, "id", iw))
            if iid in instances:
                raise ValidationError(f"{iw}: duplicate instance id {iid}")
            instances[iid] = (str(_require(inst, "category", iw)), _box(_require(inst, "bbox", iw), 1.0, iw))
        triplets = []
        for m, t in enumerate(_require(img, "triplets", where)):
            tw = f"{where}.triplets[{m}]"
            h, a, o = int(_require(t, "human", tw)), _require(t, "action", tw), t.get("object")
            o = None if o is None else int(o)
            if a not in actions:
                raise ValidationError(f"{tw}: unknown action {a!r}")
            if h not in instances or (o is not None and o not in instances):
                raise ValidationError(f"{tw}: references unknown instance id")
            triplets.append((h, a, o))
        images.append(AnnotationRecord(image_id, instances, triplets, img.get("width"), img.get("height")))
    return AnnotationFile(actions, images)


def annotations_to_dict(af: AnnotationFile) -> dict:
    images = []
    for rec in af.images:
        img = {
            "image_id": rec.image_id,
            "instances": [{"id": i, "category": c, "bbox": b.as_list()} for i, (c, b) in rec.instances.items()],
            "triplets": [{"human": h, "action": a, "object": o} for h, a, o in rec.triplets],
        }
        if rec.width is not None:
            img["width"], img["height"] = rec.width, rec.height
        images.append(img)
    return {"actions": list(af.actions), "images": images}


def load_annotations(path) -> AnnotationFile:
    return parse_annotations(read_json(path))


# ---------------------------------------------------------------------------
# prior, HOI detections, metrics


def prior_to_dict(prior: dict[str, ActionPrior]) -> dict:
    return {a: {"q_e": p.q_e, "q_s": p.q_s, "exclusive": p.exclusive} for a, p in prior.items()}


def parse_prior(data: dict) -> dict[str, ActionPrior]:
    out = {}
    for a, p in data.items():
        try:
            out[a] = ActionPrior(int(p["q_e"]), int(p["q_s"]), bool(p["exclusive"]))
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"prior entry {a!r} needs q_e, q_s, exclusive") from None
    return out


def load_prior(path) -> dict[str, ActionPrior]:
    return parse_prior(read_json(path))


def triplets_to_dict(triplets: Sequence[HoiTriplet], actions: Sequence[str] = ()) -> dict:
    dets = []
    for t in triplets:
        d = {"image_id": t.image_id, "action": t.action, "score": t.score,
             "human_bbox": t.human.as_list(), "human_score": t.human.score,
             "object_bbox": None if t.object is None else t.object.as_list(),
             "object_score": None if t.object is None else t.object.score,
             "human_index": t.human_index, "object_index": t.object_index}
        dets.append(d)
    return {"actions": list(actions), "detections": dets}


def parse_triplets(data: dict) -> tuple[list[HoiTriplet], list[str]]:
    out = []
    for n, d in enumerate(_require(data, "detections", "hoi detections")):
        where = f"detections[{n}]"
        human = _box(_require(d, "human_bbox", where), d.get("human_score", 1.0), where)
        obj = None
        if d.get("object_bbox") is not None:
            o_score = d.get("object_score")
            obj = _box(d["object_bbox"], 1.0 if o_score is None else o_score, where)
        try:
            out.append(HoiTriplet(d["image_id"], human, d["action"], obj, float(d["score"]),
                                  d.get("human_index"), d.get("object_index")))
        except (KeyError, ValueError) as e:
            raise ValidationError(f"{where}: {e}") from None
    return out, list(data.get("actions", []))


def load_triplets(path) -> tuple[list[HoiTriplet], list[str]]:
    return parse_triplets(read_json(path))


def eval_to_dict(res: EvalResult) -> dict:
    return {
        "map_role": res.map_role,
        "actions": {a: {"ap": res.ap[a], "npos": res.npos[a]} for a in res.ap},
        "pr": {a: [list(p) for p in pts] for a, pts in res.pr.items()},
    }


def parse_eval(data: dict) -> EvalResult:
    acts = data["actions"]
    return EvalResult(
        ap={a: float(v["ap"]) for a, v in acts.items()},
        npos={a: int(v["npos"]) for a, v in acts.items()},
        map_role=float(data["map_role"]),
        pr={a: [tuple(p) for p in pts] for a, pts in data.get("pr", {}).items()},
    )


def write_pr_csv(path, res: EvalResult) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["action", "rank", "precision", "recall", "score"])
        for a, pts in res.pr.items():
            for k, (p, r, t) in enumerate(pts):
                w.writerow([a, k, p, r, t])


# ---------------------------------------------------------------------------
# tensors


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_tensors(path, tensors: dict[str, np.ndarray], meta: Optional[dict] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {"format": f"hoit-f32le/{VERSION}", "tensors": [], **(meta or {})}
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())
            manifest["tensors"].append({"name": name, "shape": list(arr.shape)})
    write_json(sidecar_path(path), manifest)


def read_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    manifest = read_json(sidecar_path(path))
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC:
        raise ValidationError(f"{path}: not a tensor file")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION or count != len(manifest.get("tensors", [])):
        raise ValidationError(f"{path}: header does not match its manifest")
    pos = 12
    out = {}
    for entry in manifest["tensors"]:
        (ndim,) = struct.unpack_from("<I", buf, pos)
        shape = struct.unpack_from(f"<{ndim}I", buf, pos + 4)
        pos += 4 + 4 * ndim
        n = int(np.prod(shape, dtype=np.int64))
        if list(shape) != entry["shape"] or pos + 4 * n > len(buf):
            raise ValidationError(f"{path}: tensor {entry['name']!r} is truncated or mis-shaped")
        out[entry["name"]] = np.frombuffer(buf, dtype="<f4", count=n, offset=pos).reshape(shape).copy()
        pos += 4 * n
    if pos != len(buf):
        raise ValidationError(f"{path}: trailing bytes")
    return out, manifest


def save_params(path, params: HeadParams, actions: Sequence[str], extra: Optional[dict] = None) -> None:
    meta = {"kind": "head_params", "head_config": params.config.to_dict(), "actions": list(actions)}
    meta.update(extra or {})
    write_tensors(path, params.tensors, meta)


def load_params(path) -> tuple[HeadParams, list[str]]:
    tensors, manifest = read_tensors(path)
    if manifest.get("kind") != "head_params":
        raise ValidationError(f"{path}: not a parameter file")
    cfg = HeadConfig(**manifest["head_config"])
    try:
        params = HeadParams(cfg, {k: v.astype(np.float64) for k, v in tensors.items()})
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from None
    return params, list(manifest["actions"])

