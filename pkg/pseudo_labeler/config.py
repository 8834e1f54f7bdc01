"""
Configuration dataclasses and the JSON config file.

Defaults reproduce the published settings: 2D detections kept from score
0.9, external 3D detections from 0.7, car pseudo labels kept when the
width lies in 1.2-1.8 m and the length in 3.2-4.2 m.
"""
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

from .errors import ConfigError

DISTURB_GROUPS = ("location", "dimension", "orientation")
IOU_SPACES = ("bev", "3d")


def _check_range(name, bounds, low=-math.inf):
    if len(bounds) != 2 or not bounds[0] <= bounds[1] or bounds[0] < low:
        raise ConfigError(f"{name} must be an ordered (min, max) pair, got {bounds!r}")


def _check_fraction(name, value):
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass(frozen=True)
class ClusterParams:
    """DBSCAN radius (m) and neighbor count (the point itself included)"""

    eps: float = 0.6
    min_pts: int = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError(f"eps must be > 0, got {self.eps!r}")
        if not _is_int(self.min_pts) or self.min_pts < 1:
            raise ConfigError(f"min_pts must be an integer >= 1, got {self.min_pts!r}")


@dataclass(frozen=True)
class DimensionPrior:
    width_range: Tuple[float, float]
    length_range: Tuple[float, float]

    def __post_init__(self):
        _check_range("width_range", self.width_range, 0.0)
        _check_range("length_range", self.length_range, 0.0)

    def accepts(self, width, length):
        return (self.width_range[0] <= width <= self.width_range[1]
                and self.length_range[0] <= length <= self.length_range[1])


# Opt-in priors for the other KITTI classes; not used unless configured.
PEDESTRIAN_PRIOR = DimensionPrior(width_range=(0.3, 1.0), length_range=(0.3, 1.2))
CYCLIST_PRIOR = DimensionPrior(width_range=(0.3, 1.0), length_range=(1.2, 2.2))


@dataclass(frozen=True)
class LowCostConfig:
    det2d_score_min: float = 0.9
    width_range: Tuple[float, float] = (1.2, 1.8)
    length_range: Tuple[float, float] = (3.2, 4.2)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    nms_bev_iou: float = 0.3
    min_roi_points: int = 1
    target_classes: Tuple[str, ...] = ("Car",)
    class_priors: Dict[str, DimensionPrior] = field(default_factory=dict)
    vertical_crop: Optional[Tuple[float, float]] = None
    y_center: str = "mean"
    camera: str = "P2"
    rect_area_tol: float = 0.1

    def __post_init__(self):
        _check_fraction("det2d_score_min", self.det2d_score_min)
        _check_fraction("nms_bev_iou", self.nms_bev_iou)
        _check_range("width_range", self.width_range, 0.0)
        _check_range("length_range", self.length_range, 0.0)
        if self.min_roi_points < 1:
            raise ConfigError("min_roi_points must be >= 1")
        if not self.target_classes:
            raise ConfigError("target_classes must not be empty")
        if self.vertical_crop is not None:
            _check_range("vertical_crop", self.vertical_crop)
        if self.y_center not in ("mean", "midrange"):
            raise ConfigError(f"y_center must be 'mean' or 'midrange', got {self.y_center!r}")
        if not self.rect_area_tol >= 0:
            raise ConfigError(f"rect_area_tol must be >= 0, got {self.rect_area_tol!r}")
        for category in self.target_classes:
            if category != "Car" and category not in self.class_priors:
                raise ConfigError(f"no dimension prior for target class {category!r}")

    def prior_for(self, category):
        if category in self.class_priors:
            return self.class_priors[category]
        return DimensionPrior(self.width_range, self.length_range)


@dataclass(frozen=True)
class HighAccConfig:
    det3d_score_min: float = 0.7
    labeled_subset: Optional[int] = None

    def __post_init__(self):
        _check_fraction("det3d_score_min", self.det3d_score_min)
        if self.labeled_subset is not None and self.labeled_subset < 0:
            raise ConfigError("labeled_subset must be >= 0")


@dataclass(frozen=True)
class DisturbConfig:
    p: float = 0.05
    groups: Tuple[str, ...] = DISTURB_GROUPS
    seed: int = 0

    def __post_init__(self):
        if not self.p >= 0:
            raise ConfigError(f"p must be >= 0, got {self.p!r}")
        if not self.groups:
            raise ConfigError("groups must not be empty")
        unknown = set(self.groups) - set(DISTURB_GROUPS)
        if unknown:
            raise ConfigError(f"unknown disturbance groups {sorted(unknown)}")


@dataclass(frozen=True)
class EvalConfig:
    iou_min: float = 0.5
    space: str = "bev"
    category: str = "Car"
    heading_agnostic: bool = False
    iou_sweep: Tuple[float, ...] = ()
    ap_iou: Tuple[float, ...] = (0.7, 0.5)
    ap11: bool = False
    distance_bins: Tuple[float, ...] = (0.0, 30.0, 50.0)

    def __post_init__(self):
        _check_fraction("iou_min", self.iou_min)
        if self.space not in IOU_SPACES:
            raise ConfigError(f"space must be one of {IOU_SPACES}, got {self.space!r}")
        for value in self.iou_sweep + self.ap_iou:
            _check_fraction("IoU threshold", value)
        if list(self.distance_bins) != sorted(self.distance_bins):
            raise ConfigError("distance_bins must be increasing")


@dataclass(frozen=True)
class SynthConfig:
    n_frames: int = 10
    n_objects: int = 4
    points_per_face: int = 200
    noise_sigma: float = 0.01
    clutter_points: int = 200
    require_faces: Optional[int] = 2
    with_masks: bool = False

    def __post_init__(self):
        if self.n_frames < 0 or self.n_objects < 0 or self.points_per_face < 0:
            raise ConfigError("synth counts must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")


SECTIONS = {
    "low_cost": LowCostConfig,
    "high_accuracy": HighAccConfig,
    "disturb": DisturbConfig,
    "eval": EvalConfig,
    "synth": SynthConfig,
}


def _build(cls, data, section):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key == "cluster":
            value = _build(ClusterParams, value, f"{section}.cluster")
        elif key == "class_priors":
            if not isinstance(value, dict):
                raise ConfigError("class_priors must be an object")
            value = {name: _build(DimensionPrior, prior, f"{section}.class_priors.{name}")
                     for name, prior in value.items()}
        elif isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"bad value in {section!r}: {e}") from None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    jobs: int = 1
    low_cost: LowCostConfig = field(default_factory=LowCostConfig)
    high_accuracy: HighAccConfig = field(default_factory=HighAccConfig)
    disturb: DisturbConfig = field(default_factory=DisturbConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        if not _is_int(self.jobs) or self.jobs < 1:
            raise ConfigError(f"jobs must be an integer >= 1, got {self.jobs!r}")
        if not _is_int(self.seed) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    def to_dict(self):
        return asdict(self)

    @staticmethod
    def from_dict(d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - set(SECTIONS) - {"seed", "jobs"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(d)
        disturb = data.get("disturb")
        if "seed" in data and (disturb is None or (isinstance(disturb, dict) and "seed" not in disturb)):
            # the run seed drives disturbance unless the section pins its own
            data["disturb"] = {**(disturb or {}), "seed": data["seed"]}
        sections = {name: _build(cls, data.get(name), name) for name, cls in SECTIONS.items()}
        return RunConfig(seed=d.get("seed", 0), jobs=d.get("jobs", 1), **sections)

    def with_overrides(self, seed=None, jobs=None):
        """Command-line flags win over file values"""
        changes = {}
        if seed is not None:
            changes["seed"] = seed
            changes["disturb"] = replace(self.disturb, seed=seed)
        if jobs is not None:
            changes["jobs"] = jobs
        return replace(self, **changes) if changes else self


def load_config(path=None):
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except ValueError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return RunConfig.from_dict(doc)
