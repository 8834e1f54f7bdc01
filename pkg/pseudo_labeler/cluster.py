"""
Density clustering of RoI points and target-cluster selection
"""
import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from sklearn.cluster import DBSCAN

from .config import ClusterParams

logger = logging.getLogger(__name__)

NOISE = -1


@dataclass(frozen=True)
class Clustering:
    """Per-point cluster ids (NOISE for outliers) and cluster sizes.

    Ids are contiguous from 0 in discovery order: a cluster's id is set
    by the first core point of that cluster in input order.
    """

    labels: np.ndarray
    cluster_sizes: Dict[int, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    @property
    def n_clusters(self):
        return len(self.cluster_sizes)

    @property
    def noise_count(self):
        return int(np.count_nonzero(self.labels == NOISE))

    def members(self, cluster_id):
        return np.flatnonzero(self.labels == cluster_id)


def dbscan(points, params=None):
    """DBSCAN with an inclusive radius and a neighbor count that includes
    the point itself. Border points join the first cluster reaching them.
    """
    params = params or ClusterParams()
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return Clustering(np.zeros(0, dtype=np.int64), {})
    pts = pts.reshape(len(pts), -1)

    labels = DBSCAN(eps=params.eps, min_samples=params.min_pts, algorithm="brute").fit(pts).labels_
    labels = np.asarray(labels, dtype=np.int64)
    ids, counts = np.unique(labels[labels != NOISE], return_counts=True)
    sizes = {int(i): int(c) for i, c in zip(ids, counts)}
    logger.debug("dbscan: %d points -> %d clusters, %d noise",
                 len(pts), len(sizes), int(np.count_nonzero(labels == NOISE)))
    return Clustering(labels, sizes)


def largest_cluster(clustering, points):
    """Points of the most populated cluster; ties go to the lowest id.

    All-noise (or empty) input yields an empty subset.
    """
    pts = np.asarray(points, dtype=np.float64)
    if not clustering.cluster_sizes:
        return np.empty((0, pts.shape[-1] if pts.ndim == 2 else 3))
    best = min(clustering.cluster_sizes, key=lambda i: (-clustering.cluster_sizes[i], i))
    return pts[clustering.members(best)]


def vertical_crop(points, y_range):
    """Indices of camera-frame points whose y lies in ``y_range``"""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    y_min, y_max = y_range
    return np.flatnonzero((pts[:, 1] >= y_min) & (pts[:, 1] <= y_max))
