"""
Pseudo-label quality and detection metrics.

Two protocols share one greedy matcher:

* label quality: TP/FP/FN of pseudo labels against annotations and the
  mean relative error of the matched boxes' location, dimension and
  orientation;
* KITTI average precision: score-ranked matching per difficulty level,
  with interpolated precision sampled at 40 (or the legacy 11) recall
  points.
"""
import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .boxes import Box3D, box_iou
from .config import EvalConfig
from .errors import EmptyMatchSet
from .kitti_io import DONT_CARE
from .math_utils import canonical_yaw, wrap_angle

logger = logging.getLogger(__name__)

EPS = 1e-3
DIFFICULTIES = ("easy", "moderate", "hard")
# minimum 2D height (px), maximum occlusion level, maximum truncation
DIFFICULTY_LIMITS = {
    "easy": (40.0, 0, 0.15),
    "moderate": (25.0, 1, 0.30),
    "hard": (25.0, 2, 0.50),
}
# classes whose boxes neither count nor penalize when evaluating the key
NEIGHBOR_CLASSES = {"Car": ("Van",), "Pedestrian": ("Person_sitting",)}
DONT_CARE_OVERLAP = 0.5


def _box(item):
    if isinstance(item, Box3D):
        return item
    if hasattr(item, "box"):
        return item.box
    return Box3D.from_label_record(item)


def _score(item):
    score = getattr(item, "score", None)
    return 1.0 if score is None else float(score)


def _bbox2d(item):
    return getattr(item, "bbox2d", None)


def _overlap_fraction(box, region):
    """Share of ``box``'s 2D area covered by ``region``"""
    x1, y1 = max(box[0], region[0]), max(box[1], region[1])
    x2, y2 = min(box[2], region[2]), min(box[3], region[3])
    area = (box[2] - box[0]) * (box[3] - box[1])
    if area <= 0 or x2 <= x1 or y2 <= y1:
        return 0.0
    return (x2 - x1) * (y2 - y1) / area


def _in_dont_care(item, regions):
    bbox = _bbox2d(item)
    if bbox is None:
        return False
    return any(_overlap_fraction(bbox, r.bbox2d) >= DONT_CARE_OVERLAP for r in regions)


def _score_order(items):
    return sorted(range(len(items)), key=lambda i: (-_score(items[i]), i))


def _gt_key(box):
    return (tuple(box.loc), tuple(box.dims), box.ry)


# =========================================================================
# Label quality
# =========================================================================

@dataclass
class MatchReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    matches: List[Tuple[int, int, float]] = field(default_factory=list)
    absorbed: List[int] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def match_labels(pseudo, gt, iou_min=0.5, space="bev"):
    """Greedy matching in descending pseudo score.

    Each pseudo label takes the highest-IoU unmatched ground truth box with
    IoU >= ``iou_min``. Unmatched pseudo labels count as FP unless a
    DontCare region covers half of their 2D box; unmatched ground truth
    boxes (DontCare excluded) count as FN. Indices refer to the input lists.
    """
    dont_care = [g for g in gt if getattr(g, "category", None) == DONT_CARE]
    gt_idx = [j for j, g in enumerate(gt) if getattr(g, "category", None) != DONT_CARE]
    gt_boxes = {j: _box(gt[j]) for j in gt_idx}
    pseudo_boxes = [_box(p) for p in pseudo]

    report = MatchReport()
    free = set(gt_idx)
    for i in _score_order(pseudo):
        best = None
        for j in free:
            iou = box_iou(pseudo_boxes[i], gt_boxes[j], space)
            if iou < iou_min:
                continue
            # equal IoU: decide by box content so gt order does not matter
            rank = (iou, _gt_key(gt_boxes[j]))
            if best is None or rank > best[0]:
                best = (rank, j)
        if best is not None:
            (iou, _), j = best
            free.discard(j)
            report.matches.append((i, j, float(iou)))
        elif _in_dont_care(pseudo[i], dont_care):
            report.absorbed.append(i)
        else:
            report.fp += 1
    report.tp = len(report.matches)
    report.fn = len(free)
    return report


@dataclass(frozen=True)
class MreReport:
    loc_mre: Tuple[float, float, float]
    dim_mre: Tuple[float, float, float]
    orient_mre: float
    orient_abs: float
    n_matches: int

    def to_dict(self):
        return asdict(self)


def _angle_error(pred, truth, heading_agnostic=False):
    delta = wrap_angle(pred - truth)
    if heading_agnostic:
        delta = canonical_yaw(delta)
    return delta


def _relative_errors(pairs, heading_agnostic=False, eps=EPS):
    """Rows of |pred - gt| / max(|gt|, eps) for x, y, z, h, w, l, ry"""
    rows, angles = [], []
    for pred, truth in pairs:
        p = list(pred.loc) + list(pred.dims)
        t = list(truth.loc) + list(truth.dims)
        row = [abs(a - b) / max(abs(b), eps) for a, b in zip(p, t)]
        delta = abs(_angle_error(pred.ry, truth.ry, heading_agnostic))
        row.append(delta / max(abs(truth.ry), eps))
        rows.append(row)
        angles.append(delta)
    return np.array(rows, dtype=np.float64).reshape(-1, 7), np.array(angles, dtype=np.float64)


def _mre_from_pairs(pairs, heading_agnostic=False, eps=EPS):
    if not pairs:
        raise EmptyMatchSet("no matched boxes")
    rows, angles = _relative_errors(pairs, heading_agnostic, eps)
    mean = rows.mean(axis=0)
    return MreReport(
        loc_mre=tuple(float(v) for v in mean[:3]),
        dim_mre=tuple(float(v) for v in mean[3:6]),
        orient_mre=float(mean[6]),
        orient_abs=float(angles.mean()),
        n_matches=len(pairs),
    )


def mean_relative_error(report, pseudo, gt, heading_agnostic=False, eps=EPS):
    """Per-component mean relative error over the matches of ``report``.

    Orientation uses the wrapped angular difference; ``orient_abs`` is the
    mean absolute difference in radians.
    """
    pairs = [(_box(pseudo[i]), _box(gt[j])) for i, j, _ in report.matches]
    return _mre_from_pairs(pairs, heading_agnostic, eps)


# =========================================================================
# Difficulty
# =========================================================================

def meets_difficulty(rec, level):
    min_height, max_occlusion, max_truncation = DIFFICULTY_LIMITS[level]
    return (rec.height_2d >= min_height
            and rec.occlusion <= max_occlusion
            and rec.truncation <= max_truncation)


def assign_difficulty(rec):
    """Easiest KITTI level the record qualifies for, else "ignored" """
    for level in DIFFICULTIES:
        if meets_difficulty(rec, level):
            return level
    return "ignored"


# =========================================================================
# Average precision
# =========================================================================

def recall_points(n_points=40):
    """40 points excluding zero, or the legacy 11 points including it"""
    if n_points == 11:
        return np.linspace(0.0, 1.0, 11)
    return np.arange(1, n_points + 1) / n_points


@dataclass(frozen=True)
class ApCurve:
    difficulty: str
    space: str
    iou_min: float
    ap: Optional[float]
    n_gt: int
    n_det: int
    recall: Tuple[float, ...]
    precision: Tuple[float, ...]

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ApReport:
    category: str
    n_points: int
    curves: Tuple[ApCurve, ...]

    def get(self, difficulty, space="bev", iou_min=0.7):
        for curve in self.curves:
            if (curve.difficulty == difficulty and curve.space == space
                    and math.isclose(curve.iou_min, iou_min)):
                return curve.ap
        raise KeyError((difficulty, space, iou_min))

    def to_dict(self):
        return {"category": self.category, "n_points": self.n_points,
                "curves": [c.to_dict() for c in self.curves]}


def _frame_outcomes(dets, gts, category, level, iou_min, space):
    """Scores of the frame's TP and FP detections and its counted gt total"""
    min_height = DIFFICULTY_LIMITS[level][0]
    neighbors = NEIGHBOR_CLASSES.get(category, ())

    care, ignored_gt, dont_care = [], [], []
    for g in gts:
        if g.category == category and meets_difficulty(g, level):
            care.append(g)
        elif g.category == category or g.category in neighbors:
            ignored_gt.append(g)
        elif g.category == DONT_CARE:
            dont_care.append(g)

    candidates = [d for d in dets if d.category == category]
    gt_all = [(_box(g), True) for g in care] + [(_box(g), False) for g in ignored_gt]
    free = set(range(len(gt_all)))
    n_gt = len(care)
    outcomes = []
    for i in _score_order(candidates):
        det = candidates[i]
        det_ignored = det.height_2d < min_height
        det_box = _box(det)
        best = None
        for j in free:
            iou = box_iou(det_box, gt_all[j][0], space)
            if iou >= iou_min and (best is None or (iou, _gt_key(gt_all[j][0])) > best[0]):
                best = ((iou, _gt_key(gt_all[j][0])), j)
        if best is not None:
            j = best[1]
            free.discard(j)
            counted = gt_all[j][1]
            if counted and not det_ignored:
                outcomes.append((_score(det), True))
            elif counted:
                n_gt -= 1
        elif not det_ignored and not _in_dont_care(det, dont_care):
            outcomes.append((_score(det), False))
    return outcomes, n_gt


def average_precision(frames, iou_min=0.7, space="bev", category="Car", level="moderate",
                      n_points=40):
    """Interpolated AP (in percent) over ``frames`` = [(detections, gt), ...].

    AP is the mean over the recall points r of the best precision reached
    at recall >= r. Returns an ApCurve; ``ap`` is None when the level has
    no ground truth.
    """
    outcomes, n_gt = [], 0
    for dets, gts in frames:
        frame_outcomes, frame_gt = _frame_outcomes(dets, gts, category, level, iou_min, space)
        outcomes.extend(frame_outcomes)
        n_gt += frame_gt

    points = recall_points(n_points)
    if n_gt == 0:
        return ApCurve(level, space, iou_min, None, 0, len(outcomes),
                       tuple(float(r) for r in points), tuple(0.0 for _ in points))

    scores = np.array([s for s, _ in outcomes], dtype=np.float64)
    hits = np.array([t for _, t in outcomes], dtype=bool)
    order = np.argsort(-scores, kind="mergesort")
    hits = hits[order]
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1] if len(precision) else precision

    sampled = []
    for r in points:
        k = int(np.searchsorted(recall, r - 1e-12, side="left"))
        sampled.append(float(envelope[k]) if k < len(envelope) else 0.0)
    ap = 100.0 * float(np.mean(sampled))
    return ApCurve(level, space, iou_min, ap, n_gt, len(outcomes),
                   tuple(float(r) for r in points), tuple(sampled))


def _ap_report(frames, iou_min, spaces, category, n_points):
    curves = []
    thresholds = (iou_min,) if isinstance(iou_min, (int, float)) else tuple(iou_min)
    for iou in thresholds:
        for space in spaces:
            for level in DIFFICULTIES:
                curves.append(average_precision(frames, iou, space, category, level, n_points))
    return ApReport(category, n_points, tuple(curves))


def ap40(frames, iou_min=0.7, spaces=("bev", "3d"), category="Car"):
    """AP at 40 recall points for every difficulty, space and threshold"""
    return _ap_report(frames, iou_min, spaces, category, 40)


def ap11(frames, iou_min=0.7, spaces=("bev", "3d"), category="Car"):
    """Legacy 11-point AP"""
    return _ap_report(frames, iou_min, spaces, category, 11)


# =========================================================================
# Dataset-level evaluation
# =========================================================================

@dataclass
class EvalReport:
    n_frames: int = 0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_absorbed: int = 0
    mre: Optional[MreReport] = None
    distance_recall: List[Dict] = field(default_factory=list)
    iou_sweep: List[Dict] = field(default_factory=list)
    ap: Optional[ApReport] = None

    def to_dict(self):
        d = asdict(self)
        d["mre"] = self.mre.to_dict() if self.mre else None
        d["ap"] = self.ap.to_dict() if self.ap else None
        return d


def _distance_bins(bounds):
    edges = list(bounds) + [math.inf]
    return [(edges[i], edges[i + 1]) for i in range(len(bounds))]


def _keep(records, category):
    return [r for r in records if r.category == category]


def evaluate_frames(pairs, cfg=None, with_ap=False):
    """Aggregate label quality over ``pairs`` = [(frame_id, pseudo, gt)].

    Only ``cfg.category`` boxes take part; gt DontCare regions are kept for
    absorption. Distances are BEV ranges of the ground truth boxes.
    """
    cfg = cfg or EvalConfig()
    report = EvalReport(n_frames=len(pairs))
    bins = _distance_bins(cfg.distance_bins)
    bin_gt = [0] * len(bins)
    bin_hit = [0] * len(bins)
    sweep = {t: [0, 0, 0] for t in cfg.iou_sweep}
    matched = []

    for frame_id, pseudo, gt in pairs:
        pseudo = _keep(pseudo, cfg.category)
        gt = [g for g in gt if g.category in (cfg.category, DONT_CARE)]
        m = match_labels(pseudo, gt, cfg.iou_min, cfg.space)
        report.tp += m.tp
        report.fp += m.fp
        report.fn += m.fn
        report.n_absorbed += len(m.absorbed)
        matched.extend((_box(pseudo[i]), _box(gt[j])) for i, j, _ in m.matches)

        hit = {j for _, j, _ in m.matches}
        for j, g in enumerate(gt):
            if g.category == DONT_CARE:
                continue
            dist = math.hypot(g.loc[0], g.loc[2])
            for b, (lo, hi) in enumerate(bins):
                if lo <= dist < hi:
                    bin_gt[b] += 1
                    bin_hit[b] += j in hit
        for t in cfg.iou_sweep:
            s = match_labels(pseudo, gt, t, cfg.space)
            sweep[t][0] += s.tp
            sweep[t][1] += s.fp
            sweep[t][2] += s.fn
        logger.debug("frame %s: tp=%d fp=%d fn=%d", frame_id, m.tp, m.fp, m.fn)

    if matched:
        report.mre = _mre_from_pairs(matched, cfg.heading_agnostic)
    report.distance_recall = [
        {"range": [lo, None if math.isinf(hi) else hi], "n_gt": n, "n_matched": k,
         "recall": k / n if n else None}
        for (lo, hi), n, k in zip(bins, bin_gt, bin_hit)
    ]
    report.iou_sweep = [{"iou_min": t, "tp": v[0], "fp": v[1], "fn": v[2]}
                        for t, v in sweep.items()]
    if with_ap:
        frames = [(pseudo, gt) for _, pseudo, gt in pairs]
        metric = ap11 if cfg.ap11 else ap40
        report.ap = metric(frames, cfg.ap_iou, ("bev", "3d"), cfg.category)
    logger.info("evaluated %d frames: tp=%d fp=%d fn=%d",
                report.n_frames, report.tp, report.fp, report.fn)
    return report


# =========================================================================
# Report writers
# =========================================================================

def report_to_json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def _pct(value):
    return "-" if value is None else f"{100 * value:.1f}%"


def format_table(report):
    """Plain-text table: counts, then location/dimension/orientation MRE"""
    header = ["TP", "FP", "FN", "Loc x", "Loc y", "Loc z", "Dim h", "Dim w", "Dim l", "Orient"]
    mre = report.mre
    values = [str(report.tp), str(report.fp), str(report.fn)]
    if mre is None:
        values += ["-"] * 7
    else:
        values += [_pct(v) for v in mre.loc_mre + mre.dim_mre + (mre.orient_mre,)]
    widths = [max(len(h), len(v)) for h, v in zip(header, values)]
    lines = [
        "  ".join(h.rjust(w) for h, w in zip(header, widths)),
        "  ".join(v.rjust(w) for v, w in zip(values, widths)),
    ]
    if report.ap is not None:
        lines.append("")
        for curve in report.ap.curves:
            ap = "-" if curve.ap is None else f"{curve.ap:.2f}"
            lines.append(f"AP{report.ap.n_points} {curve.space:>3} IoU={curve.iou_min:.2f} "
                         f"{curve.difficulty:<8} {ap}")
    return "\n".join(lines) + "\n"


def pr_curves_csv(ap_report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["difficulty", "space", "iou_min", "recall", "precision"])
    for curve in ap_report.curves:
        for r, p in zip(curve.recall, curve.precision):
            writer.writerow([curve.difficulty, curve.space, f"{curve.iou_min:.2f}",
                             f"{r:.6f}", f"{p:.6f}"])
    return buf.getvalue()
