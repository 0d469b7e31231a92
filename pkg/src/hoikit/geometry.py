"""Boxes, polygon rasterization, and human/object part generation.

Coordinates are continuous pixel coordinates; pixel (i, j) covers
[j, j+1) x [i, i+1) and has its center at (j + 0.5, i + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NUM_KEYPOINTS = 17


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float
    score: float = 1.0
    category: Optional[str] = None

    def __post_init__(self):
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise ValueError(f"degenerate box {self.as_list()}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"box score {self.score} outside [0, 1]")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy, self.score, self.category)


@dataclass(frozen=True, eq=False)
class KeypointSet:
    points: np.ndarray  # (17, 2)
    visibility: np.ndarray  # (17,) bool

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        vis = np.asarray(self.visibility, dtype=bool)
        if pts.shape != (NUM_KEYPOINTS, 2) or vis.shape != (NUM_KEYPOINTS,):
            raise ValueError(f"expected {NUM_KEYPOINTS} keypoints, got {pts.shape}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "visibility", vis)

    def __eq__(self, other):
        if not isinstance(other, KeypointSet):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.visibility, other.visibility)

    @classmethod
    def from_triples(cls, triples: Sequence[Sequence[float]]) -> "KeypointSet":
        arr = np.asarray(triples, dtype=np.float64).reshape(-1, 3)
        return cls(arr[:, :2], arr[:, 2] > 0)

    def to_triples(self) -> list[list[float]]:
        return [[float(x), float(y), 2.0 if v else 0.0] for (x, y), v in zip(self.points, self.visibility)]

    def translate(self, dx: float, dy: float) -> "KeypointSet":
        return KeypointSet(self.points + np.array([dx, dy]), self.visibility)


@dataclass(frozen=True)
class PolygonMask:
    """Polygons as flat [x1, y1, x2, y2, ...] lists (COCO convention)."""

    polygons: tuple = ()

    def __post_init__(self):
        polys = tuple(tuple(float(v) for v in p) for p in self.polygons)
        for p in polys:
            if len(p) % 2 or len(p) < 6:
                raise ValueError("each polygon needs at least 3 (x, y) vertices")
        object.__setattr__(self, "polygons", polys)

    def vertices(self) -> list[np.ndarray]:
        return [np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in self.polygons]

    def translate(self, dx: float, dy: float) -> "PolygonMask":
        out = []
        for p in self.vertices():
            out.append((p + np.array([dx, dy])).ravel().tolist())
        return PolygonMask(tuple(out))


@dataclass(frozen=True)
class BinaryMask:
    bits: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class ObjectParts:
    """Grid-derived part points in image coordinates.

    ``part_boxes[k]`` is None for invalid parts.  Empty bins report their
    bin center as a placeholder point.
    """

    points: np.ndarray  # (R*R, 2)
    flags: np.ndarray  # (R*R,) bool
    part_boxes: tuple = field(default=())

    @property
    def num_valid(self) -> int:
        return int(self.flags.sum())


@dataclass(frozen=True)
class HumanParts:
    part_boxes: tuple  # 17 BBox
    flags: np.ndarray  # (17,) bool, False for invisible keypoints


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def union_box(a: BBox, b: BBox) -> BBox:
    return BBox(min(a.x1, b.x1), min(a.y1, b.y1), max(a.x2, b.x2), max(a.y2, b.y2))


def mask_shape(box: BBox) -> tuple[int, int]:
    """(height, width) of the mask raster covering ``box``."""
    h = int(round(box.height))
    w = int(round(box.width))
    if h < 1 or w < 1:
        raise ValueError(f"box {box.as_list()} rounds to an empty raster")
    return h, w


def points_in_polygon(xs: np.ndarray, ys: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd crossing test for many points against one polygon."""
    inside = np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
    n = len(poly)
    for k in range(n):
        x0, y0 = poly[k]
        x1, y1 = poly[(k + 1) % n]
        if y0 == y1:
            continue
        straddles = (y0 > ys) != (y1 > ys)
        x_cross = x0 + (ys - y0) * (x1 - x0) / (y1 - y0)
        inside ^= straddles & (xs < x_cross)
    return inside


def rasterize(poly: PolygonMask, box: BBox) -> BinaryMask:
    """Rasterize image-space polygons onto a mask covering ``box``."""
    h, w = mask_shape(box)
    ys = box.y1 + np.arange(h)[:, None] + 0.5
    xs = box.x1 + np.arange(w)[None, :] + 0.5
    bits = np.zeros((h, w), dtype=bool)
    for verts in poly.vertices():
        bits |= points_in_polygon(xs, ys, verts)
    return BinaryMask(bits.astype(np.uint8))


def _part_box(cx: float, cy: float, side: float) -> BBox:
    half = side / 2
    return BBox(cx - half, cy - half, cx + half, cy + half)


def generate_object_parts(mask: BinaryMask, box: BBox, R: int = 3, r: float = 1 / 16,
                          gamma: float = 0.1) -> ObjectParts:
    if mask_shape(box) != mask.bits.shape:
        raise ValueError(f"mask {mask.bits.shape} does not match box raster {mask_shape(box)}")
    if R < 1 or not 0 < r < 1:
        raise ValueError("need R >= 1 and r in (0, 1)")
    bits = mask.bits.astype(bool)
    h, w = bits.shape
    # pixel -> bin by pixel center
    row_bin = np.floor((np.arange(h) + 0.5) * R / h).astype(int)
    col_bin = np.floor((np.arange(w) + 0.5) * R / w).astype(int)
    side = gamma * max(box.width, box.height)

    points = np.zeros((R * R, 2))
    flags = np.zeros(R * R, dtype=bool)
    boxes = []
    for bi in range(R):
        rows = np.flatnonzero(row_bin == bi)
        for bj in range(R):
            k = bi * R + bj
            cols = np.flatnonzero(col_bin == bj)
            sub = bits[np.ix_(rows, cols)]
            count = int(sub.sum())
            if count == 0:
                mx = (cols[0] + cols[-1] + 1) / 2 if len(cols) else 0.0
                my = (rows[0] + rows[-1] + 1) / 2 if len(rows) else 0.0
            else:
                ii, jj = np.nonzero(sub)
                mx = float(np.mean(cols[jj] + 0.5))
                my = float(np.mean(rows[ii] + 0.5))
            points[k] = (box.x1 + mx, box.y1 + my)
            if count > r * sub.size:
                pi = min(max(int(np.floor(my)), 0), h - 1)
                pj = min(max(int(np.floor(mx)), 0), w - 1)
                flags[k] = bool(bits[pi, pj])
            boxes.append(_part_box(*points[k], side) if flags[k] else None)
    return ObjectParts(points, flags, tuple(boxes))


def generate_human_parts(kps: KeypointSet, human: BBox, gamma: float = 0.1) -> HumanParts:
    side = gamma * max(human.width, human.height)
    boxes = tuple(_part_box(float(x), float(y), side) for x, y in kps.points)
    return HumanParts(boxes, kps.visibility.copy())
