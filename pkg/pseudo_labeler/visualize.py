"""
Bird's-eye-view SVG rendering of points and boxes.

Geometry is written in BEV meters inside a group whose transform maps
(x, z) to the canvas with z pointing up, so vertex coordinates in the
file are the scene's own coordinates.
"""
import logging

import numpy as np

from .boxes import Box3D
from .kitti_io import LabelRecord
from .polygon import BevRect

logger = logging.getLogger(__name__)

DEFAULT_BOUNDS = (-20.0, 0.0, 20.0, 40.0)

STYLE = [
    "    .point { fill: #555555; }",
    "    .target { fill: #ff7f0e; }",
    "    .pred { fill: #1f77b4; fill-opacity: 0.15; stroke: #1f77b4; }",
    "    .gt { fill: none; stroke: #2ca02c; stroke-dasharray: 4,2; }",
    "    .rejected { fill: none; stroke: #d62728; }",
    "    .sensor { fill: #ff4500; }",
    "    polygon, circle { vector-effect: non-scaling-stroke; stroke-width: 1.5; }",
]


def to_bev_rect(item):
    if isinstance(item, BevRect):
        return item
    if isinstance(item, LabelRecord):
        item = Box3D.from_label_record(item)
    if hasattr(item, "box"):
        item = item.box
    return item.bev()


def bev_points(points):
    """(x, z) pairs of camera-frame points; 2-column input is kept as is"""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return np.zeros((0, 2))
    pts = pts.reshape(len(pts), -1)
    return pts if pts.shape[1] == 2 else pts[:, [0, 2]]


def calculate_bounds(point_sets, rects, margin=2.0):
    """Bounding box of all geometry, (min_x, min_z, max_x, max_z)"""
    chunks = [p for p in point_sets if len(p)]
    chunks += [r.corners() for r in rects]
    if not chunks:
        return DEFAULT_BOUNDS
    allpts = np.vstack(chunks)
    min_x, min_z = allpts.min(axis=0) - margin
    max_x, max_z = allpts.max(axis=0) + margin
    return float(min_x), float(min_z), float(max_x), float(max_z)


def polygon_element(corners, css_class):
    pts = " ".join(f"{x:.3f},{z:.3f}" for x, z in corners)
    return f'  <polygon class="{css_class}" points="{pts}"/>'


def circles_element(points, css_class, radius):
    circles = [f'<circle cx="{x:.3f}" cy="{z:.3f}" r="{radius}"/>' for x, z in points]
    return f'  <g class="{css_class}">' + "".join(circles) + "</g>"


def svg_header(width, height, bounds, title=None, extra_style=()):
    min_x, min_z, max_x, max_z = bounds
    span_x = max(max_x - min_x, 1e-6)
    span_z = max(max_z - min_z, 1e-6)
    scale = min(width / span_x, height / span_z)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<defs>",
        "  <style>",
        *STYLE,
        *extra_style,
        "  </style>",
        "</defs>",
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    if title:
        parts.append(f"<title>{title}</title>")
    parts.append(
        f'<g id="bev" transform="translate({-min_x * scale:.4f} {max_z * scale:.4f}) '
        f'scale({scale:.6f} {-scale:.6f})">'
    )
    return parts


def render_layers(layers, width=800, height=800, title=None, point_radius=0.05, extra_style=()):
    """SVG text for ``layers`` = [(kind, css_class, items)] with kind
    "points" (camera-frame or BEV points) or "rects" (boxes or rects).
    """
    prepared = []
    for kind, css_class, items in layers:
        if kind == "points":
            prepared.append((kind, css_class, bev_points(items)))
        else:
            prepared.append((kind, css_class, [to_bev_rect(i) for i in items]))
    bounds = calculate_bounds(
        [p for k, _, p in prepared if k == "points"],
        [r for k, _, rs in prepared if k == "rects" for r in rs],
    )

    parts = svg_header(width, height, bounds, title, extra_style)
    parts.append(circles_element([(0.0, 0.0)], "sensor", point_radius * 6))
    for kind, css_class, items in prepared:
        if kind == "points":
            if len(items):
                parts.append(circles_element(items, css_class, point_radius))
        else:
            parts.extend(polygon_element(r.corners(), css_class) for r in items)
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_bev_svg(points=None, boxes=(), gt_boxes=(), width=800, height=800, title=None):
    """Scatter of ``points`` with predicted and ground truth boxes"""
    layers = []
    if points is not None:
        layers.append(("points", "point", points))
    layers.append(("rects", "gt", list(gt_boxes)))
    layers.append(("rects", "pred", list(boxes)))
    return render_layers(layers, width, height, title)


def write_svg(svg, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(svg)
    logger.info("SVG saved to %s", path)
