"""SVG overlays: humans in red, objects in blue, action labels with scores."""

from __future__ import annotations

from collections import defaultdict
from html import escape
from pathlib import Path
from typing import Sequence

from .evaluation import HoiTriplet
from .formats import DetectionFile
from .geometry import BBox

HUMAN_COLOR = "#e02020"
OBJECT_COLOR = "#2050e0"


def _rect(box, color: str) -> str:
    return (f'<rect x="{box.x1:.2f}" y="{box.y1:.2f}" width="{box.width:.2f}" height="{box.height:.2f}" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>')


def render_svg(width: int, height: int, triplets: Sequence[HoiTriplet], min_score: float = 0.0) -> str:
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="#f4f4f4"/>']
    drawn = set()
    labels = defaultdict(list)
    for t in triplets:
        if t.score < min_score:
            continue
        for box, color in ((t.human, HUMAN_COLOR), (t.object, OBJECT_COLOR)):
            if box is not None:
                drawn.add((tuple(box.as_list()), color))
        labels[tuple(t.human.as_list())].append(t)
        if t.object is not None:
            hx, hy = t.human.center
            ox, oy = t.object.center
            parts.append(f'<line x1="{hx:.2f}" y1="{hy:.2f}" x2="{ox:.2f}" y2="{oy:.2f}" '
                         f'stroke="#30a030" stroke-width="1" stroke-dasharray="3,2"/>')
    for box, color in sorted(drawn):
        parts.append(_rect(BBox(*box), color))
    for (x1, y1, _, _), ts in labels.items():
        for k, t in enumerate(sorted(ts, key=lambda t: -t.score)):
            parts.append(f'<text x="{x1:.2f}" y="{y1 - 2 - 8 * k:.2f}" font-size="7" fill="{HUMAN_COLOR}">'
                         f'{escape(t.action)} {t.score:.2f}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_overlays(outdir, triplets: Sequence[HoiTriplet], detections: DetectionFile,
                   min_score: float = 0.0) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    by_image = defaultdict(list)
    for t in triplets:
        by_image[str(t.image_id)].append(t)
    written = []
    for rec in detections.images:
        path = outdir / f"{rec.image_id}.svg"
        path.write_text(render_svg(rec.width, rec.height, by_image.get(rec.image_id, []), min_score))
        written.append(path)
    return written
