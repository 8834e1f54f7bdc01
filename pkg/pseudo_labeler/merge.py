"""
High accuracy mode data path: filter external 3D detections on the
unlabeled split and merge them with the labeled split into one training
set.
"""
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List

from .config import HighAccConfig
from .errors import MalformedManifest, MissingDetections
from .kitti_io import parse_label_file, read_text, write_label_file
from .manifest import DatasetManifest, sample_labeled_subset
from .random import Random

logger = logging.getLogger(__name__)


@dataclass
class MergeReport:
    n_labeled: int = 0
    n_unlabeled: int = 0
    n_detections: int = 0
    n_kept: int = 0
    n_below_score: int = 0
    n_unscored: int = 0
    n_dont_care: int = 0
    kept_per_frame: Dict[str, int] = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MergeResult:
    manifest: DatasetManifest
    report: MergeReport


def filter_detections(records, threshold, report=None):
    """Keep scored, non-DontCare records with score >= threshold"""
    report = report if report is not None else MergeReport()
    kept = []
    for rec in records:
        report.n_detections += 1
        if rec.is_dont_care:
            report.n_dont_care += 1
        elif rec.score is None:
            report.n_unscored += 1
        elif rec.score < threshold:
            report.n_below_score += 1
        else:
            kept.append(rec)
    report.n_kept += len(kept)
    return kept


def _check_inputs(labeled, unlabeled, det3d_files, output_dir):
    collisions = sorted(set(labeled.frame_ids) & set(unlabeled.frame_ids))
    if collisions:
        raise MalformedManifest(f"frame ids in both splits: {collisions}")
    for frame in unlabeled:
        path = det3d_files.get(frame.frame_id)
        if path is None or not os.path.isfile(path):
            raise MissingDetections(frame.frame_id)

    protected = {os.path.abspath(f.label) for f in labeled if f.label is not None}
    targets = {}
    for frame in unlabeled:
        target = os.path.abspath(os.path.join(output_dir, f"{frame.frame_id}.txt"))
        if target in protected:
            raise MalformedManifest(f"pseudo label for {frame.frame_id!r} would overwrite {target}")
        targets[frame.frame_id] = target
    return targets


def high_acc_assemble(labeled, unlabeled, det3d_files, cfg=None, output_dir=".", seed=0):
    """Merge A (annotated) with B (unlabeled + external detections).

    ``det3d_files`` maps each unlabeled frame id to a KITTI-format result
    file with scores. Kept detections are written to
    ``output_dir/<frame_id>.txt``; the returned manifest lists every frame
    of A followed by every frame of B. Annotated label files are never
    written.
    """
    cfg = cfg or HighAccConfig()
    if cfg.labeled_subset is not None:
        labeled = sample_labeled_subset(labeled, cfg.labeled_subset, Random(seed, ("labeled_subset",)))

    targets = _check_inputs(labeled, unlabeled, det3d_files, output_dir)
    report = MergeReport(n_labeled=len(labeled), n_unlabeled=len(unlabeled))

    outputs = []
    for frame in unlabeled:
        records = parse_label_file(read_text(det3d_files[frame.frame_id]))
        before = report.n_kept
        kept = filter_detections(records, cfg.det3d_score_min, report)
        report.kept_per_frame[frame.frame_id] = report.n_kept - before
        outputs.append((frame, targets[frame.frame_id], write_label_file(kept)))

    if outputs:
        os.makedirs(output_dir, exist_ok=True)
    merged: List = list(labeled.frames)
    for frame, target, text in outputs:
        with open(target, "w", encoding="utf-8") as f:
            f.write(text)
        merged.append(replace(frame, has_annotation=True, label=target, pseudo=True))

    logger.info("merged %d labeled + %d pseudo-labeled frames, kept %d of %d boxes",
                report.n_labeled, report.n_unlabeled, report.n_kept, report.n_detections)
    return MergeResult(DatasetManifest(merged, labeled.sequence_id), report)
