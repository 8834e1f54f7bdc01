"""
3D boxes in the rectified camera frame, rotated IoU and BEV NMS
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .kitti_io import LabelRecord
from .math_utils import canonical_yaw, wrap_angle
from .polygon import BevRect, clip_convex, polygon_area


@dataclass(frozen=True)
class Box3D:
    """KITTI-style box: ``loc`` is the bottom-face center, camera y points
    down, ``dims`` is (h, w, l) and ``ry`` rotates about camera y.
    """

    loc: Tuple[float, float, float]
    dims: Tuple[float, float, float]
    ry: float
    score: float = 1.0

    @property
    def h(self):
        return self.dims[0]

    @property
    def w(self):
        return self.dims[1]

    @property
    def l(self):
        return self.dims[2]

    @property
    def volume(self):
        return self.h * self.w * self.l

    @property
    def y_range(self):
        """Vertical extent [top, bottom] (y grows downwards)"""
        return self.loc[1] - self.h, self.loc[1]

    @property
    def alpha(self):
        """Observation angle"""
        return wrap_angle(self.ry - math.atan2(self.loc[0], self.loc[2]))

    def corners(self):
        """8 x 3 corners, bottom face first"""
        h, w, l = self.dims
        x = np.array([l, l, -l, -l, l, l, -l, -l]) / 2
        y = np.array([0, 0, 0, 0, -h, -h, -h, -h], dtype=np.float64)
        z = np.array([w, -w, -w, w, w, -w, -w, w]) / 2
        c, s = math.cos(self.ry), math.sin(self.ry)
        rot = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
        return (rot @ np.vstack([x, y, z])).T + np.asarray(self.loc, dtype=np.float64)

    def bev(self):
        x, _, z = self.loc
        if self.l >= self.w:
            return BevRect((x, z), self.l, self.w, canonical_yaw(self.ry))
        return BevRect((x, z), self.w, self.l, canonical_yaw(self.ry - math.pi / 2))

    @staticmethod
    def from_label_record(rec):
        score = 1.0 if rec.score is None else rec.score
        return Box3D(tuple(rec.loc), tuple(rec.dims), rec.ry, score)

    def to_label_record(self, category, bbox2d=(0.0, 0.0, 0.0, 0.0), truncation=-1.0,
                        occlusion=-1, with_score=True):
        return LabelRecord(
            category=category,
            truncation=truncation,
            occlusion=occlusion,
            alpha=self.alpha,
            bbox2d=tuple(float(v) for v in bbox2d),
            dims=tuple(float(v) for v in self.dims),
            loc=tuple(float(v) for v in self.loc),
            ry=float(self.ry),
            score=float(self.score) if with_score else None,
        )


def bev_intersection(a, b):
    """Overlap area of two BEV rectangles"""
    if a.area <= 0 or b.area <= 0:
        return 0.0
    return polygon_area(clip_convex(a.corners(), b.corners()))


def bev_iou(a, b):
    """IoU of two BEV rectangles; zero-area rectangles give 0"""
    if a.area <= 0 or b.area <= 0:
        return 0.0
    inter = bev_intersection(a, b)
    union = a.area + b.area - inter
    return float(min(max(inter / union, 0.0), 1.0))


def iou_3d(a, b):
    """Volume IoU: BEV overlap times the overlap of the vertical extents"""
    if a.volume <= 0 or b.volume <= 0:
        return 0.0
    top = max(a.y_range[0], b.y_range[0])
    bottom = min(a.y_range[1], b.y_range[1])
    overlap_h = bottom - top
    if overlap_h <= 0:
        return 0.0
    inter = bev_intersection(a.bev(), b.bev()) * overlap_h
    union = a.volume + b.volume - inter
    return float(min(max(inter / union, 0.0), 1.0))


def box_iou(a, b, space="bev"):
    if space == "bev":
        return bev_iou(a.bev(), b.bev())
    if space == "3d":
        return iou_3d(a, b)
    raise ValueError(f"unknown IoU space {space!r}")


def bev_nms(boxes, iou_threshold):
    """Greedy NMS in BEV; returns kept indices, best score first.

    Equal scores keep input order.
    """
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))
    rects = [b.bev() for b in boxes]
    kept = []
    for i in order:
        if all(bev_iou(rects[i], rects[j]) <= iou_threshold for j in kept):
            kept.append(i)
    return kept
