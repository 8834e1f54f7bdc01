"""
Low cost pseudo labeling: 3D boxes from RoI LiDAR points.

For every confident 2D detection of a target class the labeler selects
the frustum points, clusters them, keeps the largest cluster and fits
a near-minimal BEV rectangle whose sides the points hug. Height is the
vertical spread of the cluster. Flat boxes and boxes outside the class
dimension prior are dropped and
overlapping survivors are suppressed in BEV.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .boxes import Box3D, bev_nms
from .cluster import dbscan, largest_cluster, vertical_crop
from .config import LowCostConfig
from .geometry import frustum_select, lidar_to_rect
from .kitti_io import load_frame_inputs
from .polygon import boundary_fit_rect

logger = logging.getLogger(__name__)

STEPS = ("frustum", "cluster", "target", "rectangle", "filter", "nms")


@dataclass(frozen=True)
class PseudoLabel:
    box: Box3D
    category: str
    bbox2d: Tuple[float, float, float, float]
    detection_index: int
    points: np.ndarray = field(default=None, compare=False, repr=False)

    @property
    def score(self):
        return self.box.score

    def to_label_record(self):
        return self.box.to_label_record(self.category, self.bbox2d)


@dataclass
class FrameReport:
    frame_id: str = ""
    n_detections: int = 0
    n_skipped_empty: int = 0
    n_filtered_dims: int = 0
    n_emitted: int = 0
    n_other_class: int = 0
    n_below_score: int = 0
    n_all_noise: int = 0
    n_suppressed: int = 0

    def to_dict(self):
        return asdict(self)

    def add(self, other):
        for name, value in asdict(other).items():
            if name != "frame_id":
                setattr(self, name, getattr(self, name) + value)
        return self


@dataclass(frozen=True)
class FrameLabels:
    labels: List[PseudoLabel]
    report: FrameReport

    def __len__(self):
        return len(self.labels)

    @property
    def boxes(self):
        return [label.box for label in self.labels]

    @property
    def records(self):
        return [label.to_label_record() for label in self.labels]


class FrameLabeler:
    """Runs the low cost pipeline on one frame.

    The state of the detection being processed is kept on the instance so
    a debug callback can inspect it after every stage.
    Callback signature: callback(step_number: int, step_name: str, labeler)
    """

    def __init__(self, cloud, calib, detections, cfg=None, frame_id="", debug_callback=None):
        self.cfg = cfg or LowCostConfig()
        self.calib = calib
        self.detections = list(detections)
        self.report = FrameReport(frame_id=frame_id, n_detections=len(self.detections))
        self._debug_callback = debug_callback

        self.cloud = cloud
        self.points_rect = lidar_to_rect(cloud, calib)
        self.detection = None
        self.detection_index = -1
        self.roi_points = np.zeros((0, 3))
        self.clustering = None
        self.target_points = np.zeros((0, 3))
        self.rect = None
        self.box = None
        self.candidates: List[PseudoLabel] = []
        self.labels: List[PseudoLabel] = []

    def run(self):
        for index, det in enumerate(self.detections):
            self._label_detection(index, det)
        self._suppress_duplicates()
        self._debug_step(6, "nms")
        self.report.n_emitted = len(self.labels)
        logger.debug("frame %r: %s", self.report.frame_id, self.report)
        return FrameLabels(self.labels, self.report)

    def _debug_step(self, step_number, step_name):
        if self._debug_callback is not None:
            try:
                self._debug_callback(step_number, step_name, self)
            except Exception as e:
                logger.warning("debug callback failed at step %d: %s", step_number, e)

    def _label_detection(self, index, det):
        cfg = self.cfg
        self.detection, self.detection_index = det, index
        self.roi_points = np.zeros((0, 3))
        self.clustering, self.rect, self.box = None, None, None
        self.target_points = np.zeros((0, 3))

        if det.category not in cfg.target_classes:
            self.report.n_other_class += 1
            return
        if det.score < cfg.det2d_score_min:
            self.report.n_below_score += 1
            logger.debug("detection %d: score %.3f below threshold", index, det.score)
            return

        roi = self.points_rect[frustum_select(self.cloud, self.calib, det, self.points_rect)]
        if cfg.vertical_crop is not None:
            roi = roi[vertical_crop(roi, cfg.vertical_crop)]
        self.roi_points = roi
        self._debug_step(1, "frustum")
        if len(roi) < cfg.min_roi_points:
            self.report.n_skipped_empty += 1
            logger.debug("detection %d: %d RoI points, skipped", index, len(roi))
            return

        self.clustering = dbscan(roi, cfg.cluster)
        self._debug_step(2, "cluster")
        self.target_points = largest_cluster(self.clustering, roi)
        self._debug_step(3, "target")
        if len(self.target_points) == 0:
            self.report.n_all_noise += 1
            logger.debug("detection %d: all RoI points are noise", index)
            return

        self.box = self._fit_box(self.target_points, det.score)
        self._debug_step(4, "rectangle")

        accepted = self.accepts(self.box, det.category)
        self._debug_step(5, "filter")
        if not accepted:
            self.report.n_filtered_dims += 1
            logger.debug("detection %d: h=%.2f w=%.2f l=%.2f outside prior",
                         index, self.box.h, self.box.w, self.box.l)
            return
        self.candidates.append(PseudoLabel(
            box=self.box,
            category=det.category,
            bbox2d=tuple(det.bbox2d),
            detection_index=index,
            points=self.target_points,
        ))

    def accepts(self, box, category):
        """Filter step: nonzero height, width and length inside the class prior"""
        return box.h > 0 and self.cfg.prior_for(category).accepts(box.w, box.l)

    def _fit_box(self, points, score):
        """Box of the target cluster: BEV rectangle plus vertical extent.

        The rectangle is the near-minimal one the points hug, so a cluster
        seen on two sides keeps the box axes instead of the diagonal.
        The box bottom sits at center_y + h/2 (camera y points down), with
        center_y the mean of the point heights, or the middle of their
        range in "midrange" mode.
        """
        self.rect = boundary_fit_rect(points[:, [0, 2]], self.cfg.rect_area_tol)
        y = points[:, 1]
        y_min, y_max = float(y.min()), float(y.max())
        h = y_max - y_min
        center_y = float(y.mean()) if self.cfg.y_center == "mean" else (y_min + y_max) / 2
        cx, cz = self.rect.center
        return Box3D(
            loc=(float(cx), center_y + h / 2, float(cz)),
            dims=(h, self.rect.width, self.rect.length),
            ry=self.rect.yaw,
            score=float(score),
        )

    def _suppress_duplicates(self):
        kept = sorted(bev_nms([c.box for c in self.candidates], self.cfg.nms_bev_iou))
        self.report.n_suppressed = len(self.candidates) - len(kept)
        if self.report.n_suppressed:
            logger.debug("suppressed %d overlapping boxes", self.report.n_suppressed)
        self.labels = [self.candidates[i] for i in kept]


def low_cost_label_frame(cloud, calib, detections, cfg=None, frame_id="", debug_callback=None):
    """Pseudo labels for one frame, in detection order, plus a frame report"""
    return FrameLabeler(cloud, calib, detections, cfg, frame_id, debug_callback).run()


def label_frame_files(frame, cfg=None):
    """Read one manifest frame and label it"""
    cfg = cfg or LowCostConfig()
    cloud, calib, detections = load_frame_inputs(
        frame.cloud, frame.calib, frame.detections, camera=cfg.camera
    )
    return low_cost_label_frame(cloud, calib, detections, cfg, frame_id=frame.frame_id)


def summarize(reports: List[FrameReport], frame_id: Optional[str] = "total"):
    total = FrameReport(frame_id=frame_id)
    for report in reports:
        total.add(report)
    return total
