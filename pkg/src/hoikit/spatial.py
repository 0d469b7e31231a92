"""Coordinate/offset maps, ROI cropping, pairwise masks and skeleton maps.

Maps are channel-first arrays ``(C, H, W)`` at image resolution; cell
(i, j) holds the value at pixel center (j + 0.5, i + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BBox, KeypointSet, union_box

# COCO person skeleton, 0-based keypoint indices, 19 edges
COCO_SKELETON = (
    (15, 13), (13, 11), (16, 14), (14, 12), (11, 12), (5, 11), (6, 12),
    (5, 6), (5, 7), (6, 8), (7, 9), (8, 10), (1, 2), (0, 1), (0, 2),
    (1, 3), (2, 4), (3, 5), (4, 6),
)
SKELETON_LOW, SKELETON_HIGH = 0.05, 0.95


@dataclass(frozen=True)
class OffsetMaps:
    ho: np.ndarray  # (2, H, W), relative to the object center
    oh: np.ndarray  # (2, H, W), relative to the human center


def make_coord_map(H: int, W: int) -> np.ndarray:
    """Two-channel map of pixel-center coordinates, shape (2, H, W)."""
    if H <= 0 or W <= 0:
        raise ValueError("map dimensions must be positive")
    ys, xs = np.meshgrid(np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    return np.stack([xs, ys])


def offset_maps(coord: np.ndarray, human: BBox, obj: BBox, normalize: bool = False) -> OffsetMaps:
    xo, yo = obj.center
    xh, yh = human.center
    ho = np.stack([coord[0] - xo, coord[1] - yo])
    oh = np.stack([coord[0] - xh, coord[1] - yh])
    if normalize:
        u = union_box(human, obj)
        scale = max(u.width, u.height)
        ho, oh = ho / scale, oh / scale
    return OffsetMaps(ho, oh)


def _clamp_box(box: BBox, H: int, W: int) -> tuple[float, float, float, float]:
    x1, x2 = min(max(box.x1, 0.0), W), min(max(box.x2, 0.0), W)
    y1, y2 = min(max(box.y1, 0.0), H), min(max(box.y2, 0.0), H)
    if x2 <= x1 or y2 <= y1:
        raise ValueError(f"box {box.as_list()} has no overlap with the {H}x{W} map")
    return x1, y1, x2, y2


def bilinear_sample(fmap: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``fmap`` (C, H, W) at continuous image coordinates.

    ``xs`` has shape (P,) and ``ys`` shape (Q,); returns (C, Q, P).
    Indices are clamped to the map edge.
    """
    _, H, W = fmap.shape
    u = np.clip(xs - 0.5, 0, W - 1)
    v = np.clip(ys - 0.5, 0, H - 1)
    j0 = np.minimum(np.floor(u).astype(int), W - 1)
    i0 = np.minimum(np.floor(v).astype(int), H - 1)
    j1 = np.minimum(j0 + 1, W - 1)
    i1 = np.minimum(i0 + 1, H - 1)
    fu = (u - j0)[None, None, :]
    fv = (v - i0)[None, :, None]
    top = fmap[:, i0][:, :, j0] * (1 - fu) + fmap[:, i0][:, :, j1] * fu
    bot = fmap[:, i1][:, :, j0] * (1 - fu) + fmap[:, i1][:, :, j1] * fu
    return (top * (1 - fv) + bot * fv).astype(np.float64, copy=False)


def roi_crop(fmap: np.ndarray, box: BBox, P: int) -> np.ndarray:
    """ROI-Align style crop with one bilinear sample per output bin.

    Returns a (C, P, P) array.  The box is clamped to the map first.
    """
    fmap = np.asarray(fmap)
    if fmap.ndim == 2:
        fmap = fmap[None]
    _, H, W = fmap.shape
    x1, y1, x2, y2 = _clamp_box(box, H, W)
    xs = x1 + (np.arange(P) + 0.5) * (x2 - x1) / P
    ys = y1 + (np.arange(P) + 0.5) * (y2 - y1) / P
    return bilinear_sample(fmap, xs, ys)


def _union_grid_centers(union: BBox, size: int) -> tuple[np.ndarray, np.ndarray]:
    xs = union.x1 + (np.arange(size) + 0.5) * union.width / size
    ys = union.y1 + (np.arange(size) + 0.5) * union.height / size
    return xs, ys


def _box_indicator(box: BBox, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    inx = (xs >= box.x1) & (xs < box.x2)
    iny = (ys >= box.y1) & (ys < box.y2)
    return (iny[:, None] & inx[None, :]).astype(np.float64)


def pair_masks(human: BBox, obj: BBox, size: int = 64) -> np.ndarray:
    """Human and object box masks rendered in union-box space, (2, size, size)."""
    u = union_box(human, obj)
    xs, ys = _union_grid_centers(u, size)
    return np.stack([_box_indicator(human, xs, ys), _box_indicator(obj, xs, ys)])


def edge_intensity(e: int, num_edges: int = len(COCO_SKELETON)) -> float:
    return SKELETON_LOW + e * (SKELETON_HIGH - SKELETON_LOW) / (num_edges - 1)


def _line_cells(p0: np.ndarray, p1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cells of a 1-cell-wide DDA line between two grid-space points."""
    c0 = np.floor(p0).astype(int)
    c1 = np.floor(p1).astype(int)
    n = int(max(abs(c1[0] - c0[0]), abs(c1[1] - c0[1])))
    t = np.linspace(0.0, 1.0, n + 1)
    cols = np.rint(c0[0] + t * (c1[0] - c0[0])).astype(int)
    rows = np.rint(c0[1] + t * (c1[1] - c0[1])).astype(int)
    return rows, cols


def skeleton_map(kps: KeypointSet, union: BBox, size: int = 64) -> np.ndarray:
    """Render the 19-edge skeleton on the union grid, shape (size, size)."""
    out = np.zeros((size, size))
    scale = np.array([size / union.width, size / union.height])
    grid = (kps.points - np.array([union.x1, union.y1])) * scale
    for e, (a, b) in enumerate(COCO_SKELETON):
        if not (kps.visibility[a] and kps.visibility[b]):
            continue
        rows, cols = _line_cells(grid[a], grid[b])
        keep = (rows >= 0) & (rows < size) & (cols >= 0) & (cols < size)
        out[rows[keep], cols[keep]] = edge_intensity(e)
    return out


def spatial_stack(human: BBox, obj: BBox, kps: KeypointSet | None, size: int = 64) -> np.ndarray:
    """Pair masks plus skeleton channel, (3, size, size); no keypoints -> zero skeleton."""
    masks = pair_masks(human, obj, size)
    skel = np.zeros((size, size)) if kps is None else skeleton_map(kps, union_box(human, obj), size)
    return np.concatenate([masks, skel[None]])
