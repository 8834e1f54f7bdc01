"""
LiDAR pseudo labels for monocular 3D detection datasets.

Generates 3D box pseudo labels from LiDAR sweeps and 2D detections,
merges annotated and pseudo-labeled splits, disturbs labels and
evaluates them against ground truth.
"""

__version__ = "0.1.0"

# Formats
from .kitti_io import (
    CalibBundle,
    Detection2D,
    LabelRecord,
    PointCloud,
    parse_calib,
    parse_detections,
    parse_label_file,
    parse_velodyne,
    write_label_file,
)
from .manifest import DatasetManifest, FrameEntry

# Geometry
from .boxes import Box3D, bev_iou, iou_3d
from .geometry import frustum_select, lidar_to_rect, project_to_image
from .polygon import BevRect, boundary_fit_rect, convex_hull_2d, min_area_rect, near_min_area_rects
from .cluster import Clustering, dbscan, largest_cluster

# Pipelines
from .config import (
    ClusterParams,
    DisturbConfig,
    EvalConfig,
    HighAccConfig,
    LowCostConfig,
    RunConfig,
)
from .low_cost import low_cost_label_frame
from .merge import high_acc_assemble
from .disturb import disturb_labels
from .evaluate import ap40, assign_difficulty, match_labels, mean_relative_error
from .synth import SceneSpec, generate_scene, recovery_trial
from .random import Random

# Debug visualization
from .step_visualizer import StepVisualizer

__all__ = [
    # Formats
    'CalibBundle',
    'Detection2D',
    'LabelRecord',
    'PointCloud',
    'DatasetManifest',
    'FrameEntry',
    'parse_calib',
    'parse_detections',
    'parse_label_file',
    'parse_velodyne',
    'write_label_file',
    # Geometry
    'BevRect',
    'Box3D',
    'bev_iou',
    'iou_3d',
    'convex_hull_2d',
    'min_area_rect',
    'near_min_area_rects',
    'boundary_fit_rect',
    'frustum_select',
    'lidar_to_rect',
    'project_to_image',
    'Clustering',
    'dbscan',
    'largest_cluster',
    # Pipelines
    'ClusterParams',
    'DisturbConfig',
    'EvalConfig',
    'HighAccConfig',
    'LowCostConfig',
    'RunConfig',
    'low_cost_label_frame',
    'high_acc_assemble',
    'disturb_labels',
    'ap40',
    'assign_difficulty',
    'match_labels',
    'mean_relative_error',
    'SceneSpec',
    'generate_scene',
    'recovery_trial',
    'Random',
    # Debug
    'StepVisualizer',
]
