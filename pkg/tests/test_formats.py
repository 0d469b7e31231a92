import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hoikit import formats
from hoikit.config import Config, ValidationError
from hoikit.evaluation import EvalResult, HoiTriplet
from hoikit.formats import (AnnotationFile, AnnotationRecord, DetectionFile, DetectionRecord, Instance)
from hoikit.geometry import BBox, KeypointSet, PolygonMask
from hoikit.head import HeadParams
from hoikit.regroup import ActionPrior

from fixtures import tiny_config

CATS = ["person", "cup", "kite"]
ACTIONS = ["hold", "look"]

unit = st.floats(0, 1, allow_nan=False)
coord = st.floats(-100, 100, allow_nan=False)


@st.composite
def boxes(draw, scored=True):
    x, y = draw(coord), draw(coord)
    w, h = draw(st.floats(0.5, 50)), draw(st.floats(0.5, 50))
    return BBox(x, y, x + w, y + h, score=draw(unit) if scored else 1.0)


@st.composite
def instances(draw, iid):
    cat = draw(st.sampled_from(CATS))
    kps = seg = None
    if cat == "person" and draw(st.booleans()):
        pts = draw(st.lists(st.tuples(coord, coord), min_size=17, max_size=17))
        vis = draw(st.lists(st.booleans(), min_size=17, max_size=17))
        kps = KeypointSet(np.array(pts), np.array(vis))
    if cat != "person" and draw(st.booleans()):
        seg = PolygonMask(tuple(tuple(draw(st.lists(coord, min_size=6, max_size=6)))
                                for _ in range(draw(st.integers(1, 2)))))
    return Instance(iid, cat, draw(boxes()), kps, seg)


@st.composite
def detection_files(draw):
    images = []
    for n in range(draw(st.integers(0, 3))):
        insts = [draw(instances(i)) for i in range(draw(st.integers(0, 4)))]
        humans = [i.id for i in insts if i.category == "person"]
        objects = [i.id for i in insts if i.category != "person"]
        pairs = {(h, o): (tuple(draw(st.lists(unit, min_size=2, max_size=2))), draw(unit))
                 for h in humans for o in objects}
        images.append(DetectionRecord(f"img{n}", draw(st.integers(1, 500)), draw(st.integers(1, 500)),
                                      insts, pairs))
    return DetectionFile(list(CATS), images, list(ACTIONS))


@st.composite
def annotation_files(draw):
    images = []
    for n in range(draw(st.integers(0, 3))):
        k = draw(st.integers(1, 4))
        inst = {i: (draw(st.sampled_from(CATS)), draw(boxes(scored=False))) for i in range(k)}
        trips = [(draw(st.integers(0, k - 1)), draw(st.sampled_from(ACTIONS)),
                  draw(st.none() | st.integers(0, k - 1))) for _ in range(draw(st.integers(0, 4)))]
        images.append(AnnotationRecord(f"img{n}", inst, trips, 640, 480))
    return AnnotationFile(list(ACTIONS), images)


def _through_json(d):
    return json.loads(json.dumps(d))


@given(detection_files())
def test_detections_round_trip(df):
    assert formats.parse_detections(_through_json(formats.detections_to_dict(df))) == df


@given(annotation_files())
def test_annotations_round_trip(af):
    assert formats.parse_annotations(_through_json(formats.annotations_to_dict(af))) == af


@given(st.dictionaries(st.text(min_size=1, max_size=8),
                       st.builds(ActionPrior, st.integers(0, 99), st.integers(0, 99), st.booleans())))
def test_prior_round_trip(prior):
    assert formats.parse_prior(_through_json(formats.prior_to_dict(prior))) == prior


@given(st.dictionaries(st.sampled_from(ACTIONS), st.tuples(unit, st.integers(0, 9)), min_size=1), unit)
def test_eval_round_trip(per_action, m):
    res = EvalResult({a: v[0] for a, v in per_action.items()}, {a: v[1] for a, v in per_action.items()}, m,
                     {a: [(0.5, 0.25, 0.9)] for a in per_action})
    assert formats.parse_eval(_through_json(formats.eval_to_dict(res))) == res


@given(st.lists(st.tuples(boxes(), st.none() | boxes(), unit, st.sampled_from(ACTIONS)), max_size=5))
def test_triplets_round_trip(rows):
    trips = [HoiTriplet("img", h, a, o, s, 0, None if o is None else 1) for h, o, s, a in rows]
    back, actions = formats.parse_triplets(_through_json(formats.triplets_to_dict(trips, ACTIONS)))
    assert back == trips and actions == ACTIONS


def test_config_round_trip(tmp_path):
    cfg = Config(s_min=0.3, steps=10)
    path = tmp_path / "c.json"
    formats.write_json(path, cfg.to_dict())
    assert Config.load(path) == cfg
    assert Config.load(path, s_min=0.7).s_min == 0.7
    with pytest.raises(ValidationError):
        Config.from_dict({"bogus": 1})
    with pytest.raises(ValidationError):
        Config(s_min=2.0)


@given(st.dictionaries(st.text("abcdef", min_size=1, max_size=5),
                       st.lists(st.integers(0, 3), min_size=0, max_size=3), max_size=4), st.integers(0, 99))
def test_tensors_round_trip(tmp_path_factory, shapes, seed):
    path = tmp_path_factory.mktemp("t") / "x.bin"
    rng = np.random.default_rng(seed)
    tensors = {k: rng.standard_normal(s).astype(np.float32) for k, s in shapes.items()}
    formats.write_tensors(path, tensors, {"note": "hi"})
    back, meta = formats.read_tensors(path)
    assert meta["note"] == "hi" and list(back) == list(tensors)
    for k in tensors:
        np.testing.assert_array_equal(back[k], tensors[k])


def test_tensor_header_layout(tmp_path):
    path = tmp_path / "x.bin"
    formats.write_tensors(path, {"a": np.arange(6, dtype=np.float32).reshape(2, 3)})
    raw = path.read_bytes()
    assert raw[:4] == b"HOIT"
    assert np.frombuffer(raw[4:24], dtype="<u4").tolist() == [1, 1, 2, 2, 3]
    assert np.frombuffer(raw[24:], dtype="<f4").tolist() == [0, 1, 2, 3, 4, 5]


def test_tensor_corruption_detected(tmp_path):
    path = tmp_path / "x.bin"
    formats.write_tensors(path, {"a": np.zeros((4, 4))})
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(ValidationError):
        formats.read_tensors(path)
    path.write_bytes(raw + b"\0")
    with pytest.raises(ValidationError):
        formats.read_tensors(path)
    path.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(ValidationError):
        formats.read_tensors(path)


def test_params_round_trip(tmp_path):
    cfg = tiny_config()
    params = HeadParams.init(cfg, 3)
    formats.save_params(tmp_path / "p.bin", params, ["a", "b", "c"], {"note": 1})
    back, actions = formats.load_params(tmp_path / "p.bin")
    assert back.config == cfg and actions == ["a", "b", "c"]
    for k in params.tensors:
        np.testing.assert_array_equal(back[k], params[k].astype(np.float32))
    # a float32 parameter file is a fixed point
    formats.save_params(tmp_path / "q.bin", back, actions)
    again, _ = formats.load_params(tmp_path / "q.bin")
    for k in back.tensors:
        np.testing.assert_array_equal(again[k], back[k])


# -- loading and validation -----------------------------------------------------

def _raw(instances, pair_scores=()):
    return {"categories": CATS, "actions": ACTIONS,
            "images": [{"image_id": "im", "width": 100, "height": 100, "instances": instances,
                        "pair_scores": list(pair_scores)}]}


def test_empty_file_list():
    assert formats.parse_detections({"categories": CATS, "images": []}).images == []


def test_threshold_filtering(tmp_path):
    path = tmp_path / "d.json"
    formats.write_json(path, _raw([
        {"id": 0, "category": "person", "bbox": [0, 0, 10, 10], "score": 0.49},
        {"id": 1, "category": "person", "bbox": [0, 0, 10, 10], "score": 0.51},
        {"id": 2, "category": "cup", "bbox": [0, 0, 10, 10], "score": 0.4},
        {"id": 3, "category": "cup", "bbox": [0, 0, 10, 10], "score": 0.41},
    ], [{"human": 0, "object": 3, "action_scores": [0.1, 0.2], "interactiveness": 0.5},
        {"human": 1, "object": 3, "action_scores": [0.1, 0.2], "interactiveness": 0.5}]))
    rec = formats.load_detections(path).images[0]
    assert [i.id for i in rec.instances] == [1, 3]
    assert list(rec.pair_scores) == [(1, 3)]
    assert len(formats.load_detections(path, 0.0, 0.0).images[0].instances) == 4


def test_malformed_box_names_instance():
    data = _raw([{"id": 7, "category": "cup", "bbox": [10, 0, 5, 10]}])
    with pytest.raises(ValidationError, match=r"instances\[0\]"):
        formats.parse_detections(data)


@pytest.mark.parametrize("inst, pattern", [
    ({"id": 1, "category": "dragon", "bbox": [0, 0, 1, 1]}, "unknown category"),
    ({"id": 1, "category": "cup"}, "bbox"),
    ({"id": 1, "category": "person", "bbox": [0, 0, 1, 1], "keypoints": [[0, 0, 2]]}, "keypoints"),
    ({"id": 1, "category": "cup", "bbox": [0, 0, 1, 1], "segmentation": [[0, 0, 1]]}, "segmentation"),
    ({"id": 1, "category": "cup", "bbox": [0, 0, 1]}, "bbox"),
])
def test_schema_violations(inst, pattern):
    with pytest.raises(ValidationError, match=pattern):
        formats.parse_detections(_raw([inst]))


def test_pair_scores_validated():
    inst = [{"id": 0, "category": "person", "bbox": [0, 0, 1, 1]}]
    with pytest.raises(ValidationError, match="unknown instance"):
        formats.parse_detections(_raw(inst, [{"human": 0, "object": 9, "action_scores": [0, 0],
                                              "interactiveness": 0}]))


def test_annotation_references_checked():
    data = {"actions": ACTIONS, "images": [{"image_id": "x", "instances": [
        {"id": 0, "category": "person", "bbox": [0, 0, 1, 1]}],
        "triplets": [{"human": 0, "action": "hold", "object": 3}]}]}
    with pytest.raises(ValidationError, match="unknown instance"):
        formats.parse_annotations(data)
    data["images"][0]["triplets"] = [{"human": 0, "action": "fly", "object": None}]
    with pytest.raises(ValidationError, match="unknown action"):
        formats.parse_annotations(data)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(ValidationError):
        formats.read_json(path)
