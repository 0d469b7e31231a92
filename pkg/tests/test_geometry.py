import numpy as np
import pytest
from hypothesis import given, strategies as st

from hoikit.geometry import (BBox, BinaryMask, KeypointSet, PolygonMask, generate_human_parts,
                             generate_object_parts, iou, mask_shape, rasterize, union_box)

from oracles import rasterize_oracle

coord = st.floats(-50, 50, allow_nan=False).map(lambda v: round(v * 4) / 4)
size = st.floats(0.25, 40, allow_nan=False).map(lambda v: round(v * 4) / 4 or 0.25)


@st.composite
def boxes(draw):
    x, y, w, h = draw(coord), draw(coord), draw(size), draw(size)
    return BBox(x, y, x + w, y + h)


# -- boxes ---------------------------------------------------------------------

def test_bbox_rejects_degenerate():
    with pytest.raises(ValueError):
        BBox(5, 0, 5, 10)
    with pytest.raises(ValueError):
        BBox(0, 0, 1, 1, score=1.5)


def test_iou_examples():
    b = BBox(0, 0, 10, 10)
    assert iou(b, b) == 1.0
    assert iou(b, BBox(20, 20, 30, 30)) == 0.0
    assert iou(b, BBox(5, 0, 15, 10)) == pytest.approx(1 / 3)
    assert iou(b, BBox(10, 0, 20, 10)) == 0.0  # touching edge


def test_union_examples():
    b = BBox(1, 2, 3, 4)
    assert union_box(b, b) == b
    assert union_box(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)).as_list() == [0, 0, 3, 3]
    assert union_box(BBox(0, 0, 4, 2), BBox(1, 1, 2, 5)).as_list() == [0, 0, 4, 5]


@given(boxes(), boxes())
def test_iou_properties(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    assert iou(a, a) == pytest.approx(1.0)


@given(boxes(), boxes())
def test_union_contains_both(a, b):
    u = union_box(a, b)
    for box in (a, b):
        assert u.x1 <= box.x1 and u.y1 <= box.y1 and u.x2 >= box.x2 and u.y2 >= box.y2
    assert union_box(a, b) == union_box(b, a)


# -- rasterization ------------------------------------------------------------

def test_rasterize_full_and_empty():
    box = BBox(10, 20, 18, 25)
    full = PolygonMask(((10, 20, 18, 20, 18, 25, 10, 25),))
    assert rasterize(full, box).bits.all()
    assert not rasterize(PolygonMask(()), box).bits.any()


def test_rasterize_triangle_matches_oracle():
    box = BBox(0, 0, 12, 12)
    tri = ((0, 0, 12, 0, 0, 12),)
    bits = rasterize(PolygonMask(tri), box).bits
    np.testing.assert_array_equal(bits, rasterize_oracle(tri, box.as_list()))
    # pixel centers strictly below the anti-diagonal: i + j < 11
    assert bits.sum() == 66


def test_rasterize_union_of_overlapping_polygons():
    box = BBox(0, 0, 10, 10)
    a = (0, 0, 6, 0, 6, 6, 0, 6)
    b = (4, 4, 10, 4, 10, 10, 4, 10)
    bits = rasterize(PolygonMask((a, b)), box).bits
    assert bits[5, 5] == 1  # overlap stays filled
    assert bits.sum() == 36 + 36 - 4


def test_mask_shape_rounds():
    assert mask_shape(BBox(0.2, 0.4, 10.6, 5.3)) == (5, 10)
    with pytest.raises(ValueError):
        mask_shape(BBox(0, 0, 0.4, 3))


@given(st.lists(st.tuples(st.integers(0, 16), st.integers(0, 16)), min_size=3, max_size=8))
def test_rasterize_matches_oracle_property(pts):
    flat = tuple(float(v) for p in pts for v in p)
    box = BBox(0, 0, 16, 16)
    np.testing.assert_array_equal(rasterize(PolygonMask((flat,)), box).bits,
                                  rasterize_oracle((flat,), box.as_list()))


@given(st.integers(-20, 20), st.integers(-20, 20))
def test_rasterize_translation(dx, dy):
    poly = PolygonMask(((1, 1, 9, 2, 5, 8),))
    box = BBox(0, 0, 10, 10)
    np.testing.assert_array_equal(rasterize(poly, box).bits,
                                  rasterize(poly.translate(dx, dy), box.translate(dx, dy)).bits)


def test_polygon_validation():
    with pytest.raises(ValueError):
        PolygonMask(((0, 0, 1, 1),))
    with pytest.raises(ValueError):
        BinaryMask(np.array([[0, 2]]))


# -- object parts -------------------------------------------------------------

BOX30 = BBox(100, 50, 130, 80)


def _mask(coords):
    bits = np.zeros((30, 30), dtype=np.uint8)
    for i, j in coords:
        bits[i, j] = 1
    return BinaryMask(bits)


def test_parts_full_mask_bin_centers():
    parts = generate_object_parts(BinaryMask(np.ones((30, 30))), BOX30)
    assert parts.flags.all()
    expected = [(100 + 10 * bj + 5, 50 + 10 * bi + 5) for bi in range(3) for bj in range(3)]
    np.testing.assert_allclose(parts.points, expected)
    # part side gamma * max(w, h) = 3
    assert parts.part_boxes[0].as_list() == [103.5, 53.5, 106.5, 56.5]


def test_parts_empty_mask():
    parts = generate_object_parts(BinaryMask(np.zeros((30, 30))), BOX30)
    assert not parts.flags.any()
    assert all(b is None for b in parts.part_boxes)


def test_parts_six_pixels_is_below_threshold():
    # threshold 100 / 16 = 6.25 pixels per 10x10 bin
    parts = generate_object_parts(_mask([(i, j) for i in range(2) for j in range(3)]), BOX30)
    assert parts.num_valid == 0


def test_parts_seven_pixels_is_valid():
    parts = generate_object_parts(_mask([(0, j) for j in range(7)]), BOX30)
    assert parts.flags.tolist() == [True] + [False] * 8
    # mean of pixel centers 0.5 .. 6.5 along x, 0.5 along y
    np.testing.assert_allclose(parts.points[0], (100 + 3.5, 50 + 0.5))


def test_parts_mean_outside_mask_is_invalid():
    # two opposite 2x2 clumps in the middle bin; their mean lands on an empty pixel
    clumps = [(10, 10), (10, 11), (11, 10), (11, 11), (18, 18), (18, 19), (19, 18), (19, 19)]
    parts = generate_object_parts(_mask(clumps), BOX30)
    np.testing.assert_allclose(parts.points[4], (115, 65))
    assert not parts.flags[4]


def test_parts_mask_shape_mismatch():
    with pytest.raises(ValueError):
        generate_object_parts(BinaryMask(np.ones((10, 10))), BOX30)


@given(st.integers(0, 2 ** 30), st.integers(1, 4))
def test_parts_points_inside_their_bins(seed, R):
    rng = np.random.default_rng(seed)
    bits = (rng.random((24, 20)) < 0.4).astype(np.uint8)
    box = BBox(3, 7, 23, 31)
    parts = generate_object_parts(BinaryMask(bits), box, R=R)
    for k in np.flatnonzero(parts.flags):
        bi, bj = divmod(k, R)
        x, y = parts.points[k]
        assert box.x1 + bj * 20 / R <= x <= box.x1 + (bj + 1) * 20 / R
        assert box.y1 + bi * 24 / R <= y <= box.y1 + (bi + 1) * 24 / R


# -- human parts --------------------------------------------------------------

def test_human_part_boxes():
    pts = np.full((17, 2), 50.0)
    kps = KeypointSet(pts, np.ones(17, dtype=bool))
    parts = generate_human_parts(kps, BBox(0, 0, 100, 200))
    assert all(b.width == 20 and b.height == 20 for b in parts.part_boxes)
    assert parts.part_boxes[0].as_list() == [40, 40, 60, 60]
    assert parts.flags.all()


def test_human_parts_invisible():
    kps = KeypointSet(np.full((17, 2), 5.0), np.zeros(17, dtype=bool))
    parts = generate_human_parts(kps, BBox(0, 0, 10, 10))
    assert len(parts.part_boxes) == 17
    assert not parts.flags.any()


def test_keypoint_triples_round_trip():
    triples = [[float(k), float(2 * k), 2.0 if k % 3 else 0.0] for k in range(17)]
    kps = KeypointSet.from_triples(triples)
    assert kps.to_triples() == triples
    with pytest.raises(ValueError):
        KeypointSet.from_triples(triples[:5])
