"""
Frame transforms, image projection and frustum point selection
"""
import numpy as np
import shapely

from .kitti_io import PointCloud


def _xyz(points):
    if isinstance(points, PointCloud):
        points = points.points
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return np.zeros((0, 3))
    return pts.reshape(len(pts), -1)[:, :3]


def lidar_to_rect(points, calib):
    """p_rect = R0_rect . (Tr_velo_to_cam . [p; 1])"""
    pts = _xyz(points)
    tr = calib.Tr_velo_to_cam
    cam = pts @ tr[:, :3].T + tr[:, 3]
    return cam @ calib.R0_rect.T


def rect_to_lidar(points, calib):
    """Analytic inverse of lidar_to_rect"""
    pts = _xyz(points)
    tr = calib.Tr_velo_to_cam
    cam = np.linalg.solve(calib.R0_rect, pts.T).T
    return np.linalg.solve(tr[:, :3], (cam - tr[:, 3]).T).T


def project_to_image(points_rect, P2):
    """Homogeneous projection -> N x 3 array of (u, v, depth).

    ``depth`` is the third homogeneous coordinate before division; rows
    with depth <= 0 are returned as-is and must be filtered by the caller.
    """
    pts = _xyz(points_rect)
    hom = pts @ P2[:, :3].T + P2[:, 3]
    depth = hom[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = hom[:, 0] / depth
        v = hom[:, 1] / depth
    return np.stack([u, v, depth], axis=1)


def region_mask(uv, det):
    """Which image points fall in the detection's mask (or its bbox)"""
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    if det.mask is not None:
        polygon = shapely.Polygon(det.mask)
        shapely.prepare(polygon)
        return np.asarray(shapely.intersects_xy(polygon, uv[:, 0], uv[:, 1]), dtype=bool)
    x1, y1, x2, y2 = det.bbox2d
    return (uv[:, 0] >= x1) & (uv[:, 0] <= x2) & (uv[:, 1] >= y1) & (uv[:, 1] <= y2)


def frustum_select(cloud, calib, det, points_rect=None):
    """Indices of the cloud points inside the detection's camera frustum.

    A point is selected iff its depth is positive and it projects inside
    the mask polygon (when present) or else the 2D box; edges count as
    inside. ``points_rect`` may carry the already transformed cloud.
    """
    if points_rect is None:
        points_rect = lidar_to_rect(cloud, calib)
    uvd = project_to_image(points_rect, calib.P2)
    front = np.flatnonzero(uvd[:, 2] > 0)
    if len(front) == 0:
        return front
    inside = region_mask(uvd[front, :2], det)
    return front[inside]
