"""
Synthetic scenes with known ground truth.

Car-sized boxes stand on a flat ground plane in front of a camera whose
LiDAR frame equals the rectified camera frame (canonical calibration).
Only the vertical faces turned towards the sensor emit points, which
reproduces the L-shaped and single-face returns a real scan produces.
Every object gets a perfect 2D detection: the image-plane box of its
projected corners.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .boxes import Box3D, bev_intersection
from .config import LowCostConfig, SynthConfig
from .errors import ConfigError, PlacementFailed
from .evaluate import match_labels
from .geometry import project_to_image
from .kitti_io import (
    CalibBundle,
    Detection2D,
    PointCloud,
    encode_velodyne,
    write_calib,
    write_detections,
    write_label_file,
)
from .low_cost import low_cost_label_frame
from .manifest import DatasetManifest, FrameEntry, write_manifest
from .math_utils import canonical_yaw
from .polygon import convex_hull_2d
from .random import Random

logger = logging.getLogger(__name__)

# a face counts as visible when the sensor sees it at more than this cosine
FACE_COS_MIN = 0.05
NOISE_CLIP = 3.0


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    n_objects: int = 3
    height_range: Tuple[float, float] = (1.4, 1.7)
    width_range: Tuple[float, float] = (1.5, 1.7)
    length_range: Tuple[float, float] = (3.6, 4.0)
    yaw_range: Tuple[float, float] = (-math.pi / 2, math.pi / 2)
    x_range: Tuple[float, float] = (-10.0, 10.0)
    z_range: Tuple[float, float] = (8.0, 35.0)
    ground_y: float = 1.65
    points_per_face: int = 200
    noise_sigma: float = 0.01
    clutter_points: int = 200
    clutter_clearance: float = 1.0
    max_visible_faces: Optional[int] = None
    require_faces: Optional[int] = None
    with_masks: bool = False
    max_retries: int = 200

    def __post_init__(self):
        for name in ("height_range", "width_range", "length_range", "yaw_range",
                     "x_range", "z_range"):
            low, high = getattr(self, name)
            if low > high:
                raise ConfigError(f"{name} must be ordered, got {(low, high)!r}")
        if self.z_range[0] <= 0:
            raise ConfigError("objects must be placed in front of the camera (z > 0)")
        if self.n_objects < 0 or self.points_per_face < 0 or self.clutter_points < 0:
            raise ConfigError("scene counts must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.require_faces is not None and self.require_faces not in (1, 2):
            raise ConfigError("require_faces must be 1 or 2")

    @staticmethod
    def from_config(cfg: SynthConfig, seed=0):
        return SceneSpec(
            seed=seed,
            n_objects=cfg.n_objects,
            points_per_face=cfg.points_per_face,
            noise_sigma=cfg.noise_sigma,
            clutter_points=cfg.clutter_points,
            require_faces=cfg.require_faces,
            with_masks=cfg.with_masks,
        )


@dataclass(frozen=True)
class Scene:
    cloud: PointCloud
    calib: CalibBundle
    boxes: List[Box3D]
    detections: List[Detection2D]
    visible_faces: List[int] = field(default_factory=list)
    owner: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def label_records(self):
        """Ground truth as KITTI records (fully visible, not truncated)"""
        return [
            box.to_label_record("Car", det.bbox2d, truncation=0.0, occlusion=0, with_score=False)
            for box, det in zip(self.boxes, self.detections)
        ]


def _faces(box):
    """Vertical side faces as (start corner, end corner, outward normal) in BEV"""
    bottom = box.corners()[:4][:, [0, 2]]
    center = np.array([box.loc[0], box.loc[2]])
    faces = []
    for i in range(4):
        a, b = bottom[i], bottom[(i + 1) % 4]
        mid = (a + b) / 2
        normal = mid - center
        normal = normal / np.linalg.norm(normal)
        faces.append((a, b, normal))
    return faces


def _facing(faces):
    """Cosines between each face normal and the direction to the sensor"""
    cosines = []
    for a, b, normal in faces:
        mid = (a + b) / 2
        to_sensor = -mid / np.linalg.norm(mid)
        cosines.append(float(normal @ to_sensor))
    return cosines


def _visible(cosines, max_faces=None):
    order = sorted((i for i, c in enumerate(cosines) if c > FACE_COS_MIN),
                   key=lambda i: (-cosines[i], i))
    return order[:max_faces] if max_faces is not None else order


def _image_box(box, calib):
    uvd = project_to_image(box.corners(), calib.P2)
    uv = uvd[:, :2]
    bbox = (float(uv[:, 0].min()), float(uv[:, 1].min()),
            float(uv[:, 0].max()), float(uv[:, 1].max()))
    return bbox, uv


def _boxes_2d_overlap(a, b):
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _sample_box(spec, rng):
    h = rng.uniform(*spec.height_range)
    w = rng.uniform(*spec.width_range)
    l = rng.uniform(*spec.length_range)
    ry = canonical_yaw(rng.uniform(*spec.yaw_range))
    x = rng.uniform(*spec.x_range)
    z = rng.uniform(*spec.z_range)
    return Box3D(loc=(float(x), spec.ground_y, float(z)), dims=(float(h), float(w), float(l)),
                 ry=float(ry), score=1.0)


def _place_objects(spec, calib, rng):
    boxes, images, visible = [], [], []
    for k in range(spec.n_objects):
        for attempt in range(spec.max_retries):
            box = _sample_box(spec, rng.child("object", k, attempt))
            faces = _visible(_facing(_faces(box)), spec.max_visible_faces)
            if spec.require_faces is not None and len(faces) != spec.require_faces:
                continue
            bbox, uv = _image_box(box, calib)
            if any(bev_intersection(box.bev(), other.bev()) > 0 for other in boxes):
                continue
            if any(_boxes_2d_overlap(bbox, other[0]) for other in images):
                continue
            boxes.append(box)
            images.append((bbox, uv))
            visible.append(faces)
            break
        else:
            raise PlacementFailed(f"could not place object {k} after {spec.max_retries} tries")
    return boxes, images, visible


def _face_points(box, face, n, sigma, rng):
    a, b, _ = face
    # one sample per slot along the face, like the columns of a scan
    t = (np.arange(n) + rng.float(n)) / max(n, 1)
    s = rng.float(n)
    bev = a[None, :] + t[:, None] * (b - a)[None, :]
    y = box.loc[1] - s * box.h
    pts = np.stack([bev[:, 0], y, bev[:, 1]], axis=1)
    if sigma > 0:
        noise = np.clip(rng.normal(sigma, n), -NOISE_CLIP * sigma, NOISE_CLIP * sigma)
        direction = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        pts = pts + direction * noise[:, None]
    return pts


def _clutter(spec, boxes, rng):
    n = spec.clutter_points
    x = rng.uniform(spec.x_range[0] - 5, spec.x_range[1] + 5, n)
    z = rng.uniform(max(1.0, spec.z_range[0] - 5), spec.z_range[1] + 5, n)
    y = rng.uniform(spec.ground_y - 2.5, spec.ground_y, n)
    pts = np.stack([x, y, z], axis=1).reshape(-1, 3)
    keep = np.ones(len(pts), dtype=bool)
    for box in boxes:
        keep &= box.bev().signed_distance(pts[:, [0, 2]]) <= -spec.clutter_clearance
    return pts[keep]


def generate_scene(spec=None, key=()):
    """Deterministic scene for ``spec``; ``key`` selects an independent
    variant under the same seed (used for the frames of a dataset).
    """
    spec = spec or SceneSpec()
    rng = Random(spec.seed, ("scene",) + tuple(key))
    calib = CalibBundle.canonical()
    boxes, images, visible = _place_objects(spec, calib, rng.child("placement"))

    chunks, owners, detections = [], [], []
    for k, (box, (bbox, uv), faces) in enumerate(zip(boxes, images, visible)):
        all_faces = _faces(box)
        for f in faces:
            pts = _face_points(box, all_faces[f], spec.points_per_face, spec.noise_sigma,
                               rng.child("points", k, f))
            chunks.append(pts)
            owners.append(np.full(len(pts), k, dtype=np.int64))
        mask = convex_hull_2d(uv) if spec.with_masks else None
        detections.append(Detection2D(bbox2d=bbox, category="Car", score=1.0, mask=mask))

    clutter = _clutter(spec, boxes, rng.child("clutter"))
    chunks.append(clutter)
    owners.append(np.full(len(clutter), -1, dtype=np.int64))

    xyz = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 3))
    cloud = PointCloud.from_xyz(xyz)
    logger.debug("scene: %d objects, %d points", len(boxes), len(cloud))
    return Scene(cloud, calib, boxes, detections, [len(f) for f in visible],
                 np.concatenate(owners))


@dataclass(frozen=True)
class ObjectRecovery:
    matched: bool
    yaw_err: Optional[float] = None
    center_err: Optional[float] = None
    dim_err: Optional[float] = None
    visible_faces: int = 0


@dataclass(frozen=True)
class TrialResult:
    objects: List[ObjectRecovery]
    labels: list
    report: object

    @property
    def recovered(self):
        return sum(o.matched for o in self.objects)


def recovery_trial(spec=None, cfg=None, scene=None):
    """Label a generated scene and compare each object with its pseudo label.

    Errors: |yaw| difference modulo pi (radians), BEV center distance (m),
    and the largest relative error among h, w, l.
    """
    spec = spec or SceneSpec()
    cfg = cfg or LowCostConfig()
    scene = scene or generate_scene(spec)
    result = low_cost_label_frame(scene.cloud, scene.calib, scene.detections, cfg)
    match = match_labels(result.labels, scene.boxes, iou_min=0.5, space="bev")
    by_gt = {j: i for i, j, _ in match.matches}

    objects = []
    for j, box in enumerate(scene.boxes):
        if j not in by_gt:
            objects.append(ObjectRecovery(False, visible_faces=scene.visible_faces[j]))
            continue
        pred = result.labels[by_gt[j]].box
        objects.append(ObjectRecovery(
            matched=True,
            yaw_err=abs(canonical_yaw(pred.ry - box.ry)),
            center_err=math.hypot(pred.loc[0] - box.loc[0], pred.loc[2] - box.loc[2]),
            dim_err=max(abs(p - t) / t for p, t in zip(pred.dims, box.dims)),
            visible_faces=scene.visible_faces[j],
        ))
    return TrialResult(objects, result.labels, result.report)


def dump_scene(scene, out_dir, frame_id, with_labels=True):
    """Write one scene in the KITTI layout; returns its manifest entry"""
    paths = {
        "cloud": os.path.join(out_dir, "velodyne", f"{frame_id}.bin"),
        "calib": os.path.join(out_dir, "calib", f"{frame_id}.txt"),
        "detections": os.path.join(out_dir, "detections", f"{frame_id}.json"),
    }
    if with_labels:
        paths["label"] = os.path.join(out_dir, "label_2", f"{frame_id}.txt")
    for path in paths.values():
        os.makedirs(os.path.dirname(path), exist_ok=True)

    with open(paths["cloud"], "wb") as f:
        f.write(encode_velodyne(scene.cloud))
    with open(paths["calib"], "w", encoding="utf-8") as f:
        f.write(write_calib(scene.calib))
    with open(paths["detections"], "w", encoding="utf-8") as f:
        f.write(write_detections(scene.detections))
    if with_labels:
        with open(paths["label"], "w", encoding="utf-8") as f:
            f.write(write_label_file(scene.label_records()))
    return FrameEntry(frame_id=frame_id, has_annotation=with_labels,
                      **{k: os.path.abspath(v) for k, v in paths.items()})


def dump_dataset(spec, n_frames, out_dir, with_labels=True):
    """Write ``n_frames`` scenes plus ``manifest.json``; returns the manifest"""
    frames = []
    for i in range(n_frames):
        frame_id = f"{i:06d}"
        scene = generate_scene(spec, key=("frame", i))
        frames.append(dump_scene(scene, out_dir, frame_id, with_labels))
    manifest = DatasetManifest(frames)
    os.makedirs(out_dir, exist_ok=True)
    write_manifest(manifest, os.path.join(out_dir, "manifest.json"))
    logger.info("wrote %d synthetic frames to %s", n_frames, out_dir)
    return manifest
