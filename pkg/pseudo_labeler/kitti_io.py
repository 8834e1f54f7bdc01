"""
KITTI calibration, label, velodyne and detection file formats.

Coordinate frames (KITTI convention):
    LiDAR (velodyne): x forward, y left, z up
    Rectified camera: x right, y down, z forward

All parsers are pure functions of their input. They accept ``str`` or
``bytes`` and turn every malformed input into the typed error of the
format; nothing else escapes.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import (
    InvalidScore,
    MalformedCalib,
    MalformedCloud,
    MalformedDetections,
    MalformedLabelLine,
    MissingCalibKey,
)

logger = logging.getLogger(__name__)

DONT_CARE = "DontCare"
CALIB_SHAPES = {"R0_rect": (3, 3), "Tr_velo_to_cam": (3, 4)}
ORTHO_TOL = 1e-3


def _decode(data, error):
    if isinstance(data, (bytes, bytearray, memoryview)):
        try:
            return bytes(data).decode("utf-8")
        except UnicodeDecodeError as e:
            raise error(f"input is not UTF-8 text: {e}") from None
    return data


# =========================================================================
# Calibration
# =========================================================================

@dataclass(frozen=True)
class CalibBundle:
    """Projection and rigid transforms linking LiDAR, camera and image.

    ``P2`` is the projection matrix of the configured camera (the left
    color camera unless another key was requested). ``extra`` keeps the
    remaining keys of the file, in file order, so writing the bundle
    reproduces the file.
    """

    P2: np.ndarray
    R0_rect: np.ndarray
    Tr_velo_to_cam: np.ndarray
    camera: str = "P2"
    extra: Tuple[Tuple[str, Tuple[float, ...]], ...] = ()
    order: Tuple[str, ...] = ()

    @staticmethod
    def canonical(focal=700.0, cx=600.0, cy=180.0):
        """Identity rotations, LiDAR frame == camera frame, pinhole P2"""
        p2 = np.array([[focal, 0.0, cx, 0.0], [0.0, focal, cy, 0.0], [0.0, 0.0, 1.0, 0.0]])
        tr = np.hstack([np.eye(3), np.zeros((3, 1))])
        return CalibBundle(P2=p2, R0_rect=np.eye(3), Tr_velo_to_cam=tr)

    def validate(self):
        """Check the rotation invariants of a freshly read file"""
        r0 = self.R0_rect
        if not np.allclose(r0 @ r0.T, np.eye(3), atol=ORTHO_TOL):
            raise MalformedCalib("R0_rect is not orthonormal")
        det = float(np.linalg.det(self.Tr_velo_to_cam[:, :3]))
        if abs(det - 1.0) > ORTHO_TOL:
            raise MalformedCalib(f"Tr_velo_to_cam rotation determinant {det:.6f} != 1")
        return self


def _calib_values(key, text):
    try:
        values = tuple(float(v) for v in text.split())
    except ValueError:
        raise MalformedCalib(f"non-numeric value in {key!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise MalformedCalib(f"non-finite value in {key!r}")
    return values


def parse_calib(text, camera="P2"):
    """Parse a KITTI object calibration file.

    Needs ``<camera>:`` (12 values), ``R0_rect:`` (9) and
    ``Tr_velo_to_cam:`` (12). Other keys are kept but otherwise ignored.
    """
    text = _decode(text, MalformedCalib)
    entries = {}
    order = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise MalformedCalib(f"line without key: {line[:40]!r}")
        key, value = line.split(":", 1)
        key = key.strip()
        if key in entries:
            raise MalformedCalib(f"duplicate key {key!r}")
        entries[key] = _calib_values(key, value)
        order.append(key)

    shapes = {camera: (3, 4), **CALIB_SHAPES}
    matrices = {}
    for key, shape in shapes.items():
        if key not in entries:
            raise MissingCalibKey(key)
        values = entries[key]
        if len(values) != shape[0] * shape[1]:
            raise MalformedCalib(
                f"{key!r} has {len(values)} values, expected {shape[0] * shape[1]}"
            )
        matrices[key] = np.array(values, dtype=np.float64).reshape(shape)

    extra = tuple((k, v) for k, v in entries.items() if k not in shapes)
    calib = CalibBundle(
        P2=matrices[camera],
        R0_rect=matrices["R0_rect"],
        Tr_velo_to_cam=matrices["Tr_velo_to_cam"],
        camera=camera,
        extra=extra,
        order=tuple(order),
    )
    return calib.validate()


def write_calib(calib):
    """Serialize in KITTI layout (``%.12e`` values), preserving key order"""
    values = dict(calib.extra)
    values[calib.camera] = tuple(calib.P2.ravel())
    values["R0_rect"] = tuple(calib.R0_rect.ravel())
    values["Tr_velo_to_cam"] = tuple(calib.Tr_velo_to_cam.ravel())
    order = list(calib.order) or [calib.camera, "R0_rect", "Tr_velo_to_cam"]
    order += [k for k in values if k not in order]
    lines = [f"{k}: " + " ".join(f"{v:.12e}" for v in values[k]) for k in order]
    return "\n".join(lines) + "\n"


# =========================================================================
# Labels
# =========================================================================

@dataclass(frozen=True)
class LabelRecord:
    """One line of a KITTI label file (15 fields, or 16 with score)"""

    category: str
    truncation: float
    occlusion: int
    alpha: float
    bbox2d: Tuple[float, float, float, float]
    dims: Tuple[float, float, float]  # h, w, l
    loc: Tuple[float, float, float]  # bottom-face center, camera frame
    ry: float
    score: Optional[float] = None
    raw: Optional[str] = field(default=None, compare=False, repr=False)

    @property
    def is_dont_care(self):
        return self.category == DONT_CARE

    @property
    def height_2d(self):
        return self.bbox2d[3] - self.bbox2d[1]

    def to_line(self):
        if self.is_dont_care and self.raw is not None:
            return self.raw
        fields = [
            self.category,
            f"{self.truncation:.2f}",
            f"{self.occlusion:d}",
            f"{self.alpha:.2f}",
        ]
        fields += [f"{v:.2f}" for v in self.bbox2d]
        fields += [f"{v:.2f}" for v in self.dims]
        fields += [f"{v:.2f}" for v in self.loc]
        fields.append(f"{self.ry:.2f}")
        if self.score is not None:
            fields.append(f"{self.score:.4f}")
        return " ".join(fields)


def _parse_label_line(line, line_no):
    parts = line.split()
    if len(parts) not in (15, 16):
        raise MalformedLabelLine(line_no, f"{len(parts)} fields")
    try:
        numbers = [float(v) for v in parts[1:]]
    except ValueError:
        raise MalformedLabelLine(line_no, "non-numeric field") from None
    if not all(math.isfinite(v) for v in numbers):
        raise MalformedLabelLine(line_no, "non-finite field")
    occlusion = numbers[1]
    if occlusion != int(occlusion):
        raise MalformedLabelLine(line_no, "occlusion is not an integer")

    record = LabelRecord(
        category=parts[0],
        truncation=numbers[0],
        occlusion=int(occlusion),
        alpha=numbers[2],
        bbox2d=tuple(numbers[3:7]),
        dims=tuple(numbers[7:10]),
        loc=tuple(numbers[10:13]),
        ry=numbers[13],
        score=numbers[14] if len(numbers) == 15 else None,
        raw=line.strip() if parts[0] == DONT_CARE else None,
    )
    if record.is_dont_care:
        return record

    x1, y1, x2, y2 = record.bbox2d
    if x1 > x2 or y1 > y2:
        raise MalformedLabelLine(line_no, "bbox corners out of order")
    if min(record.dims) < 0:
        raise MalformedLabelLine(line_no, "negative dimension")
    return record


def parse_label_file(text):
    """Parse KITTI label text; DontCare lines are kept with their raw text"""
    text = _decode(text, lambda msg: MalformedLabelLine(0, msg))
    records = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        records.append(_parse_label_line(line, line_no))
    return records


def write_label_file(records):
    """Serialize records: 2-decimal fields, 4-decimal score when present"""
    return "".join(r.to_line() + "\n" for r in records)


# =========================================================================
# Velodyne
# =========================================================================

@dataclass(frozen=True)
class PointCloud:
    """N x 4 float32 array (x, y, z, reflectance) in the LiDAR frame"""

    points: np.ndarray
    dropped: int = 0

    def __len__(self):
        return len(self.points)

    @property
    def xyz(self):
        return self.points[:, :3]

    @staticmethod
    def from_xyz(xyz, reflectance=0.0):
        xyz = np.asarray(xyz, dtype=np.float32).reshape(-1, 3)
        r = np.full((len(xyz), 1), reflectance, dtype=np.float32)
        return PointCloud(np.hstack([xyz, r]))


def parse_velodyne(data):
    """Packed little-endian float32 quadruples; non-finite points dropped"""
    if isinstance(data, str):
        raise MalformedCloud("velodyne data must be bytes")
    data = bytes(data)
    if len(data) % 16 != 0:
        raise MalformedCloud(f"byte length {len(data)} is not a multiple of 16")
    points = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    finite = np.isfinite(points).all(axis=1)
    dropped = int(len(points) - finite.sum())
    if dropped:
        logger.warning("dropped %d non-finite points", dropped)
    return PointCloud(points[finite].astype(np.float32), dropped=dropped)


def encode_velodyne(cloud):
    points = cloud.points if isinstance(cloud, PointCloud) else cloud
    return np.ascontiguousarray(points, dtype="<f4").tobytes()


# =========================================================================
# 2D detections (external instance segmentation output)
# =========================================================================

@dataclass(frozen=True)
class Detection2D:
    bbox2d: Tuple[float, float, float, float]
    category: str
    score: float
    mask: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def height(self):
        return self.bbox2d[3] - self.bbox2d[1]

    def to_dict(self):
        d = {"bbox": [float(v) for v in self.bbox2d], "score": float(self.score),
             "class": self.category}
        if self.mask is not None:
            d["mask"] = [[float(x), float(y)] for x, y in self.mask]
        return d


def _number(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedDetections(f"{what} must be a number")
    try:
        value = float(value)
    except OverflowError:
        raise MalformedDetections(f"{what} is out of range") from None
    if not math.isfinite(value):
        raise MalformedDetections(f"{what} must be finite")
    return value


def _parse_detection(index, item):
    if not isinstance(item, dict):
        raise MalformedDetections(f"detection {index} is not an object")
    bbox = item.get("bbox")
    if not isinstance(bbox, list) or len(bbox) != 4:
        raise MalformedDetections(f"detection {index}: bbox must have 4 numbers")
    bbox = tuple(_number(v, f"detection {index} bbox") for v in bbox)
    if bbox[0] > bbox[2] or bbox[1] > bbox[3]:
        raise MalformedDetections(f"detection {index}: bbox corners out of order")
    category = item.get("class")
    if not isinstance(category, str):
        raise MalformedDetections(f"detection {index}: class must be a string")
    score = _number(item.get("score"), f"detection {index} score")
    if not 0.0 <= score <= 1.0:
        raise InvalidScore(score, index)

    mask = item.get("mask")
    if mask is not None:
        if not isinstance(mask, list) or len(mask) < 3:
            raise MalformedDetections(f"detection {index}: mask needs >= 3 vertices")
        vertices = []
        for vertex in mask:
            if not isinstance(vertex, list) or len(vertex) != 2:
                raise MalformedDetections(f"detection {index}: mask vertex must be [x, y]")
            vertices.append([_number(v, f"detection {index} mask") for v in vertex])
        mask = np.array(vertices, dtype=np.float64)
    return Detection2D(bbox2d=bbox, category=category, score=score, mask=mask)


def parse_detections(text):
    """Parse the detection JSON array; no score filtering happens here"""
    text = _decode(text, MalformedDetections)
    try:
        doc = json.loads(text)
    except (ValueError, RecursionError) as e:
        raise MalformedDetections(f"invalid JSON: {e}") from None
    if not isinstance(doc, list):
        raise MalformedDetections("top-level value must be an array")
    return [_parse_detection(i, item) for i, item in enumerate(doc)]


def write_detections(detections):
    return json.dumps([d.to_dict() for d in detections], indent=1) + "\n"


def read_text(path):
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def load_frame_inputs(cloud_path, calib_path, detections_path, camera="P2"):
    """Read and parse the three inputs of a low cost frame"""
    cloud = parse_velodyne(read_bytes(cloud_path))
    calib = parse_calib(read_text(calib_path), camera=camera)
    detections = parse_detections(read_text(detections_path))
    return cloud, calib, detections

