import csv
import io
import json
import math

import pytest

from pseudo_labeler.boxes import Box3D
from pseudo_labeler.config import EvalConfig
from pseudo_labeler.errors import EmptyMatchSet
from pseudo_labeler.evaluate import (
    MatchReport,
    ap11,
    ap40,
    assign_difficulty,
    average_precision,
    evaluate_frames,
    format_table,
    match_labels,
    mean_relative_error,
    pr_curves_csv,
    report_to_json,
)

from .conftest import make_record

DONT_CARE_LINE = dict(category="DontCare", loc=(-1000.0, -1000.0, -1000.0),
                      dims=(-1.0, -1.0, -1.0), ry=-10.0, truncation=-1.0, occlusion=-1)


def _scored(rec, score):
    return make_record(rec.category, rec.loc, rec.dims, rec.ry, rec.bbox2d,
                       rec.truncation, rec.occlusion, score)


# Matching

def test_ground_truth_matches_itself():
    gt = [make_record(loc=(x, 1.65, 20.0 + x)) for x in (-8.0, 0.0, 8.0)]
    report = match_labels(gt, gt)
    assert (report.tp, report.fp, report.fn) == (3, 0, 0)
    assert sorted((i, j) for i, j, _ in report.matches) == [(0, 0), (1, 1), (2, 2)]


def test_disjoint_sets():
    pseudo = [make_record(loc=(0.0, 1.65, 60.0))]
    gt = [make_record(loc=(0.0, 1.65, 20.0))]
    report = match_labels(pseudo, gt)
    assert (report.tp, report.fp, report.fn) == (0, 1, 1)


def test_two_pseudo_three_gt():
    gt = [
        make_record(loc=(0.0, 1.65, 20.0)),
        make_record(loc=(10.0, 1.65, 30.0)),
        make_record(loc=(-10.0, 1.65, 40.0)),
    ]
    pseudo = [make_record(loc=(1.0, 1.65, 20.0), score=0.9),
              make_record(loc=(0.0, 1.65, 60.0), score=0.8)]
    report = match_labels(pseudo, gt, iou_min=0.5)
    assert (report.tp, report.fp, report.fn) == (1, 1, 2)
    ((i, j, iou),) = report.matches
    assert (i, j) == (0, 0)
    assert iou == pytest.approx(0.6)
    assert match_labels(pseudo, gt, iou_min=0.61).tp == 0


def test_matching_ignores_gt_order():
    gt = [make_record(loc=(x, 1.65, 20.0)) for x in (0.0, 0.6)]
    pseudo = [make_record(loc=(0.3, 1.65, 20.0), score=0.9)]
    forward = match_labels(pseudo, gt)
    backward = match_labels(pseudo, gt[::-1])
    assert gt[forward.matches[0][1]] == gt[::-1][backward.matches[0][1]]


def test_higher_score_claims_contested_gt():
    gt = [make_record(loc=(0.0, 1.65, 20.0))]
    pseudo = [make_record(loc=(0.4, 1.65, 20.0), score=0.6),
              make_record(loc=(0.8, 1.65, 20.0), score=0.9)]
    report = match_labels(pseudo, gt)
    assert report.matches[0][0] == 1
    assert report.fp == 1


def test_unmatched_pseudo_in_dont_care_is_absorbed():
    dont_care = make_record(bbox2d=(400.0, 100.0, 700.0, 300.0), **DONT_CARE_LINE)
    pseudo = [make_record(loc=(0.0, 1.65, 60.0), bbox2d=(500.0, 150.0, 600.0, 200.0), score=0.9)]
    report = match_labels(pseudo, [dont_care])
    assert (report.tp, report.fp, report.fn) == (0, 0, 0)
    assert report.absorbed == [0]


def test_3d_space_needs_vertical_overlap():
    gt = [make_record(loc=(0.0, 1.65, 20.0))]
    floating = [make_record(loc=(0.0, -1.0, 20.0), score=0.9)]
    assert match_labels(floating, gt, space="bev").tp == 1
    assert match_labels(floating, gt, space="3d").tp == 0


# Mean relative error

def test_relative_error_of_depth():
    gt = [make_record(loc=(2.0, 1.65, 40.0), ry=math.pi / 2)]
    pseudo = [make_record(loc=(2.0, 1.65, 41.6), ry=math.pi / 2)]
    mre = mean_relative_error(MatchReport(matches=[(0, 0, 1.0)]), pseudo, gt)
    assert mre.loc_mre == pytest.approx((0.0, 0.0, 0.04))
    assert mre.dim_mre == pytest.approx((0.0, 0.0, 0.0))
    assert mre.orient_mre == 0.0
    assert mre.n_matches == 1


def test_relative_error_averages_matches():
    gt = [make_record(loc=(0.0, 1.65, 20.0), dims=(1.5, 1.6, 4.0)),
          make_record(loc=(10.0, 1.65, 30.0), dims=(1.5, 1.6, 4.0))]
    pseudo = [make_record(loc=(0.0, 1.65, 20.0), dims=(1.5, 1.6, 4.4)),
              make_record(loc=(10.0, 1.65, 30.0), dims=(1.5, 1.6, 4.0))]
    mre = mean_relative_error(match_labels(pseudo, gt), pseudo, gt)
    assert mre.dim_mre[2] == pytest.approx(0.05)
    # x of the first gt is zero: the floor keeps the ratio finite
    assert mre.loc_mre[0] == 0.0


def test_heading_agnostic_orientation():
    gt = [make_record(ry=0.5)]
    flipped = [make_record(ry=0.5 - math.pi)]
    report = MatchReport(matches=[(0, 0, 1.0)])
    assert mean_relative_error(report, flipped, gt).orient_abs == pytest.approx(math.pi)
    assert mean_relative_error(report, flipped, gt, heading_agnostic=True).orient_abs == \
        pytest.approx(0.0, abs=1e-12)


def test_empty_match_set():
    with pytest.raises(EmptyMatchSet):
        mean_relative_error(MatchReport(), [], [])


# Difficulty

@pytest.mark.parametrize("height,occlusion,truncation,expected", [
    (50.0, 0, 0.0, "easy"),
    (40.0, 0, 0.15, "easy"),
    (30.0, 0, 0.0, "moderate"),
    (50.0, 1, 0.2, "moderate"),
    (30.0, 2, 0.4, "hard"),
    (20.0, 0, 0.0, "ignored"),
    (50.0, 3, 0.0, "ignored"),
    (50.0, 0, 0.6, "ignored"),
])
def test_assign_difficulty(height, occlusion, truncation, expected):
    rec = make_record(bbox2d=(100.0, 100.0, 200.0, 100.0 + height),
                      occlusion=occlusion, truncation=truncation)
    assert assign_difficulty(rec) == expected


# Average precision

def _micro_dataset(with_moderate=False):
    """Five easy cars detected with scores 0.9..0.5 plus one far false positive"""
    frames = []
    for k, score in enumerate((0.9, 0.8, 0.7, 0.6, 0.5)):
        gt = [make_record(loc=(0.0, 1.65, 15.0 + k), bbox2d=(500.0, 150.0, 560.0, 200.0))]
        dets = [_scored(gt[0], score)]
        if k == 0:
            dets.append(make_record(loc=(10.0, 1.65, 40.0), bbox2d=(800.0, 150.0, 850.0, 200.0),
                                    score=0.75))
        if k == 4 and with_moderate:
            gt.append(make_record(loc=(-8.0, 1.65, 30.0), bbox2d=(300.0, 170.0, 340.0, 200.0),
                                  occlusion=1))
        frames.append((dets, gt))
    return frames


def test_replayed_ground_truth_scores_100():
    frames = [(_scored(g, 0.9), g) for g in [make_record(loc=(0.0, 1.65, 20.0))]]
    frames = [([d], [g]) for d, g in frames]
    report = ap40(frames, iou_min=0.7)
    for space in ("bev", "3d"):
        for level in ("easy", "moderate", "hard"):
            assert report.get(level, space, 0.7) == pytest.approx(100.0)


def test_no_detections_scores_zero():
    frames = [([], [make_record()])]
    assert average_precision(frames, level="easy").ap == 0.0


def test_level_without_gt_has_no_ap():
    frames = [([make_record(score=0.9)], [make_record(category="Pedestrian")])]
    curve = average_precision(frames, level="easy")
    assert curve.ap is None
    assert curve.n_gt == 0


def test_micro_dataset_ap40():
    report = ap40(_micro_dataset(), iou_min=0.7)
    assert report.get("easy", "bev", 0.7) == pytest.approx(90.0)
    assert report.get("easy", "3d", 0.7) == pytest.approx(90.0)


def test_micro_dataset_with_moderate_only_gt():
    frames = _micro_dataset(with_moderate=True)
    assert average_precision(frames, level="easy").ap == pytest.approx(90.0)
    assert average_precision(frames, level="moderate").ap == pytest.approx(74.1667, abs=1e-4)
    assert average_precision(frames, level="hard").ap == pytest.approx(74.1667, abs=1e-4)


def test_micro_dataset_ap11():
    report = ap11(_micro_dataset(), iou_min=0.7, spaces=("bev",))
    assert report.get("easy", "bev", 0.7) == pytest.approx(1000.0 / 11.0)
    assert report.n_points == 11


def test_ap_does_not_grow_with_iou_threshold():
    frames = _micro_dataset(with_moderate=True)
    # shift every detection a little so strict thresholds start to fail
    shifted = [([make_record(loc=(d.loc[0] + 0.5, d.loc[1], d.loc[2]), bbox2d=d.bbox2d,
                             score=d.score) for d in dets], gt) for dets, gt in frames]
    values = [average_precision(shifted, iou_min=t).ap for t in (0.3, 0.5, 0.7, 0.9)]
    assert values == sorted(values, reverse=True)
    assert values[-1] == 0.0


def test_small_detection_matched_to_care_gt_leaves_denominator():
    gt = [make_record(bbox2d=(500.0, 150.0, 560.0, 200.0))]
    small = [make_record(bbox2d=(500.0, 150.0, 560.0, 170.0), score=0.9)]
    curve = average_precision([(small, gt)], level="moderate")
    assert curve.n_gt == 0
    assert curve.ap is None


def test_neighbor_class_is_ignored():
    gt = [make_record(category="Van")]
    dets = [make_record(score=0.9)]
    curve = average_precision([(dets, gt + [make_record(loc=(9.0, 1.65, 30.0))])], level="easy")
    # the detection on the van is neither TP nor FP
    assert curve.n_det == 0
    assert curve.ap == 0.0


# Dataset evaluation and writers

def _pairs():
    return [
        ("000000", [_scored(make_record(loc=(0.0, 1.65, 20.0)), 0.9)],
         [make_record(loc=(0.0, 1.65, 20.0)), make_record(loc=(5.0, 1.65, 40.0))]),
        ("000001", [_scored(make_record(loc=(1.0, 1.65, 60.0)), 0.9)],
         [make_record(loc=(1.0, 1.65, 60.0)), make_record(category="Pedestrian")]),
    ]


def test_evaluate_frames_counts_and_bins():
    report = evaluate_frames(_pairs(), EvalConfig(iou_sweep=(0.5, 0.99)))
    assert (report.tp, report.fp, report.fn) == (2, 0, 1)
    assert report.mre.loc_mre == pytest.approx((0.0, 0.0, 0.0))
    assert [b["n_gt"] for b in report.distance_recall] == [1, 1, 1]
    assert [b["recall"] for b in report.distance_recall] == [1.0, 0.0, 1.0]
    assert report.distance_recall[-1]["range"] == [50.0, None]
    assert [s["tp"] for s in report.iou_sweep] == [2, 2]


def test_evaluate_frames_without_matches():
    pairs = [("000000", [], [make_record()])]
    report = evaluate_frames(pairs)
    assert report.mre is None
    assert report.fn == 1
    assert "-" in format_table(report)


def test_writers():
    report = evaluate_frames(_pairs(), with_ap=True)
    doc = json.loads(report_to_json(report))
    assert doc["tp"] == 2
    assert doc["ap"]["n_points"] == 40
    table = format_table(report)
    assert table.splitlines()[0].split()[:3] == ["TP", "FP", "FN"]
    assert "AP40" in table
    rows = list(csv.reader(io.StringIO(pr_curves_csv(report.ap))))
    assert rows[0] == ["difficulty", "space", "iou_min", "recall", "precision"]
    assert len(rows) == 1 + 40 * len(report.ap.curves)


def test_box_inputs_are_accepted():
    box = Box3D(loc=(0.0, 1.65, 20.0), dims=(1.5, 1.6, 4.0), ry=0.0, score=0.8)
    assert match_labels([box], [box]).tp == 1
