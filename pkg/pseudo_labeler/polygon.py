"""
Bird's-eye-view polygon geometry: convex hull, convex clipping, the
minimum-area enclosing rectangle and a near-minimal one fitted to the
points it encloses.

BEV points are (x, z) pairs of the rectified camera frame. "CCW" is
counter-clockwise with x as the first axis and z as the second.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import EmptyInput
from .math_utils import canonical_yaw, cross

# relative area difference under which two rectangles count as a tie
AREA_TIE = 1e-10


def _as_points(points):
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise EmptyInput("no points")
    return pts.reshape(-1, 2)


def convex_hull_2d(points):
    """Monotone-chain convex hull, CCW, collinear vertices dropped.

    A single distinct point returns itself; a collinear set returns its
    two extreme points.
    """
    pts = np.unique(_as_points(points), axis=0)
    if len(pts) <= 2:
        return pts

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2:
                (ox, oz), (ax, az) = chain[-2], chain[-1]
                if cross(ax - ox, az - oz, p[0] - ox, p[1] - oz) > 0:
                    break
                chain.pop()
            chain.append(p)
        return chain

    seq = [tuple(p) for p in pts.tolist()]
    lower = half(seq)
    upper = half(seq[::-1])
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def signed_area(poly):
    """Shoelace area, positive for CCW"""
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(poly) < 3:
        return 0.0
    x, z = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(z, -1)) - np.dot(z, np.roll(x, -1)))


def polygon_area(poly):
    return abs(signed_area(poly))


def clip_convex(subject, clip):
    """Sutherland-Hodgman: part of ``subject`` inside the convex CCW ``clip``"""
    output = [tuple(p) for p in np.asarray(subject, dtype=np.float64).reshape(-1, 2).tolist()]
    clip = np.asarray(clip, dtype=np.float64).reshape(-1, 2).tolist()

    for i in range(len(clip)):
        if not output:
            break
        ax, az = clip[i - 1]
        bx, bz = clip[i]
        ex, ez = bx - ax, bz - az
        inputs, output = output, []
        s = inputs[-1]
        ds = cross(ex, ez, s[0] - ax, s[1] - az)
        for e in inputs:
            de = cross(ex, ez, e[0] - ax, e[1] - az)
            if de >= 0:
                if ds < 0:
                    output.append(_cut(s, e, ds, de))
                output.append(e)
            elif ds >= 0:
                output.append(_cut(s, e, ds, de))
            s, ds = e, de
    return np.array(output, dtype=np.float64).reshape(-1, 2)


def _cut(s, e, ds, de):
    t = ds / (ds - de)
    return (s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1]))


def points_in_convex(points, poly, slack=0.0):
    """Boolean mask of points inside (or within ``slack`` of) a CCW polygon"""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    inside = np.ones(len(points), dtype=bool)
    for i in range(len(poly)):
        a, b = poly[i - 1], poly[i]
        edge = b - a
        norm = math.hypot(edge[0], edge[1])
        if norm == 0:
            continue
        d = (edge[0] * (points[:, 1] - a[1]) - edge[1] * (points[:, 0] - a[0])) / norm
        inside &= d >= -slack
    return inside


@dataclass(frozen=True)
class BevRect:
    """Oriented rectangle in the BEV plane.

    ``yaw`` follows the KITTI ``ry`` sense: the long axis points along
    (cos yaw, -sin yaw) in (x, z). It lies in [-pi/2, pi/2).
    """

    center: Tuple[float, float]
    length: float
    width: float
    yaw: float

    @property
    def area(self):
        return self.length * self.width

    @property
    def axes(self):
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([c, -s]), np.array([s, c])

    def corners(self):
        """4 x 2 array, CCW"""
        u, n = self.axes
        c = np.asarray(self.center, dtype=np.float64)
        hl, hw = self.length / 2, self.width / 2
        return np.array([
            c + u * hl + n * hw,
            c - u * hl + n * hw,
            c - u * hl - n * hw,
            c + u * hl - n * hw,
        ])

    def signed_distance(self, points):
        """Distance to the boundary, positive inside"""
        u, n = self.axes
        d = np.asarray(points, dtype=np.float64).reshape(-1, 2) - np.asarray(self.center)
        return np.minimum(self.length / 2 - np.abs(d @ u), self.width / 2 - np.abs(d @ n))

    def to_dict(self):
        return {"center": [float(v) for v in self.center], "length": self.length,
                "width": self.width, "yaw": self.yaw}


def _rect_in_frame(u, n, u_range, n_range):
    """Rectangle spanned by extents along the orthonormal frame (u, n)"""
    center = u * (u_range[0] + u_range[1]) / 2 + n * (n_range[0] + n_range[1]) / 2
    eu = u_range[1] - u_range[0]
    en = n_range[1] - n_range[0]
    yaw_u = canonical_yaw(math.atan2(-u[1], u[0]))
    yaw_n = canonical_yaw(math.atan2(-n[1], n[0]))
    if abs(eu - en) <= AREA_TIE * max(eu, en):
        yaw = min((yaw_u, yaw_n), key=abs)
    else:
        yaw = yaw_u if eu > en else yaw_n
    return BevRect((float(center[0]), float(center[1])), float(max(eu, en)), float(min(eu, en)), yaw)


def _degenerate_rect(hull):
    """Rectangle of a hull with one or two vertices"""
    if len(hull) == 1:
        return BevRect((float(hull[0, 0]), float(hull[0, 1])), 0.0, 0.0, 0.0)
    d = hull[1] - hull[0]
    mid = (hull[0] + hull[1]) / 2
    yaw = canonical_yaw(math.atan2(-d[1], d[0]))
    return BevRect((float(mid[0]), float(mid[1])), float(np.hypot(*d)), 0.0, yaw)


def _edge_frames(hull):
    """Per hull edge: unit axes and the hull's extents along them, plus areas"""
    edges = np.roll(hull, -1, axis=0) - hull
    u = edges / np.hypot(edges[:, 0], edges[:, 1])[:, None]
    n = np.stack([-u[:, 1], u[:, 0]], axis=1)
    pu = hull @ u.T
    pn = hull @ n.T
    u_min, u_max = pu.min(axis=0), pu.max(axis=0)
    n_min, n_max = pn.min(axis=0), pn.max(axis=0)
    areas = (u_max - u_min) * (n_max - n_min)
    return u, n, (u_min, u_max), (n_min, n_max), areas


def _frame_rects(frames, indices):
    u, n, (u_min, u_max), (n_min, n_max), _ = frames
    return [
        _rect_in_frame(u[i], n[i], (u_min[i], u_max[i]), (n_min[i], n_max[i]))
        for i in indices
    ]


def min_area_rect(points):
    """Minimum-area rectangle enclosing ``points`` (rotating calipers).

    An optimal rectangle is flush with some hull edge, so every hull edge
    direction is tried. Ties are broken by the smallest |yaw|.
    """
    hull = convex_hull_2d(points)
    if len(hull) <= 2:
        return _degenerate_rect(hull)
    frames = _edge_frames(hull)
    areas = frames[-1]
    best = areas.min()
    rects = _frame_rects(frames, np.flatnonzero(areas <= best * (1 + AREA_TIE)))
    return min(rects, key=lambda r: abs(r.yaw))


def near_min_area_rects(points, rel_tol):
    """Every hull-edge rectangle whose area is within ``rel_tol`` of the
    minimum, smallest area first.

    The hull of points seen on two sides of a box is close to a right
    triangle, and the rectangle flush with its long side has about the
    same area as the box itself, so the minimum alone cannot tell them
    apart.
    """
    hull = convex_hull_2d(points)
    if len(hull) <= 2:
        return [_degenerate_rect(hull)]
    frames = _edge_frames(hull)
    areas = frames[-1]
    picked = np.flatnonzero(areas <= areas.min() * (1 + max(rel_tol, AREA_TIE)))
    picked = picked[np.argsort(areas[picked], kind="mergesort")]
    return _frame_rects(frames, picked)


def boundary_fit_rect(points, rel_tol=0.1):
    """Near-minimal enclosing rectangle whose sides the points hug.

    Among ``near_min_area_rects`` the one with the smallest mean distance
    from the points to its boundary wins; on equal fit the smaller area,
    then the smaller |yaw|.
    """
    pts = _as_points(points)
    rects = near_min_area_rects(pts, rel_tol)
    if len(rects) == 1:
        return rects[0]
    fits = [float(np.mean(np.abs(r.signed_distance(pts)))) for r in rects]
    best = min(fits)
    close = [r for r, f in zip(rects, fits) if f <= best + 1e-12]
    return min(close, key=lambda r: (r.area, abs(r.yaw)))
