import math

import numpy as np
import pytest

from pseudo_labeler.boxes import Box3D, bev_iou, bev_nms, box_iou, iou_3d
from pseudo_labeler.polygon import BevRect


def _grid_bev_iou(a, b, n=2000):
    """Midpoint-grid estimate of the BEV IoU"""
    corners = np.vstack([a.corners(), b.corners()])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    xs = lo[0] + (np.arange(n) + 0.5) * (hi[0] - lo[0]) / n
    zs = lo[1] + (np.arange(n) + 0.5) * (hi[1] - lo[1]) / n
    gx, gz = np.meshgrid(xs, zs)
    pts = np.column_stack([gx.ravel(), gz.ravel()])
    in_a = a.signed_distance(pts) >= 0
    in_b = b.signed_distance(pts) >= 0
    return np.count_nonzero(in_a & in_b) / np.count_nonzero(in_a | in_b)


def test_corners_reproduce_dimensions(car_box):
    c = car_box.corners()
    assert np.linalg.norm(c[0] - c[1]) == pytest.approx(car_box.w)
    assert np.linalg.norm(c[1] - c[2]) == pytest.approx(car_box.l)
    assert np.linalg.norm(c[0] - c[4]) == pytest.approx(car_box.h)
    # bottom face at loc y, top face above it (camera y points down)
    np.testing.assert_allclose(c[:4, 1], car_box.loc[1])
    np.testing.assert_allclose(c[4:, 1], car_box.loc[1] - car_box.h)
    np.testing.assert_allclose(c.mean(axis=0)[[0, 2]], [car_box.loc[0], car_box.loc[2]])


def test_bev_matches_corners(car_box):
    rect = car_box.bev()
    assert rect.length == car_box.l
    assert rect.width == car_box.w
    assert rect.yaw == pytest.approx(0.3)
    bottom = car_box.corners()[:4][:, [0, 2]]
    assert rect.signed_distance(bottom) == pytest.approx(np.zeros(4), abs=1e-12)


def test_bev_swaps_axes_when_wider_than_long():
    box = Box3D(loc=(0.0, 0.0, 10.0), dims=(1.0, 3.0, 1.0), ry=0.0)
    rect = box.bev()
    assert (rect.length, rect.width) == (3.0, 1.0)
    assert rect.yaw == pytest.approx(-math.pi / 2)


def test_alpha():
    assert Box3D(loc=(0.0, 1.0, 10.0), dims=(1, 1, 1), ry=0.5).alpha == pytest.approx(0.5)
    assert Box3D(loc=(10.0, 1.0, 10.0), dims=(1, 1, 1), ry=0.0).alpha == pytest.approx(-math.pi / 4)


def test_label_record_conversion(car_box):
    rec = car_box.to_label_record("Car", (1.0, 2.0, 3.0, 4.0))
    assert rec.truncation == -1.0
    assert rec.occlusion == -1
    assert rec.score == 1.0
    assert rec.alpha == pytest.approx(car_box.alpha)
    assert Box3D.from_label_record(rec) == car_box
    assert car_box.to_label_record("Car", with_score=False).score is None


def test_bev_iou_basic_cases():
    a = BevRect((0.5, 0.5), 1.0, 1.0, 0.0)
    assert bev_iou(a, a) == pytest.approx(1.0)
    assert bev_iou(a, BevRect((5.0, 5.0), 1.0, 1.0, 0.0)) == 0.0
    assert bev_iou(a, BevRect((1.0, 0.5), 1.0, 1.0, 0.0)) == pytest.approx(1.0 / 3.0)
    assert bev_iou(a, BevRect((0.5, 0.5), 0.0, 0.0, 0.0)) == 0.0


def test_bev_iou_matches_grid_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = BevRect(tuple(rng.uniform(-1, 1, 2)), rng.uniform(2, 5), rng.uniform(1, 2),
                    rng.uniform(-math.pi / 2, math.pi / 2))
        b = BevRect(tuple(rng.uniform(-1, 1, 2)), rng.uniform(2, 5), rng.uniform(1, 2),
                    rng.uniform(-math.pi / 2, math.pi / 2))
        iou = bev_iou(a, b)
        assert iou == pytest.approx(bev_iou(b, a), abs=1e-12)
        assert iou == pytest.approx(_grid_bev_iou(a, b), abs=1e-3)


def test_bev_iou_invariant_under_rigid_motion():
    a = BevRect((0.0, 0.0), 4.0, 1.6, 0.2)
    b = BevRect((1.0, 0.5), 3.8, 1.7, -0.4)
    theta, shift = 0.9, np.array([12.0, -3.0])
    c, s = math.cos(theta), math.sin(theta)

    def moved(r):
        x, z = r.center
        center = (c * x - s * z + shift[0], s * x + c * z + shift[1])
        return BevRect(center, r.length, r.width, r.yaw - theta)

    assert bev_iou(moved(a), moved(b)) == pytest.approx(bev_iou(a, b), abs=1e-9)


def test_iou_3d_hand_computed():
    a = Box3D(loc=(0.0, 0.0, 10.0), dims=(2.0, 1.6, 4.0), ry=0.0)
    b = Box3D(loc=(0.0, 1.0, 10.0), dims=(2.0, 1.6, 4.0), ry=0.0)
    assert iou_3d(a, a) == pytest.approx(1.0)
    # same footprint, heights overlap by half
    assert iou_3d(a, b) == pytest.approx(1.0 / 3.0)
    c = Box3D(loc=(0.0, -2.5, 10.0), dims=(2.0, 1.6, 4.0), ry=0.0)
    assert iou_3d(a, c) == 0.0


def test_iou_3d_matches_grid_oracle():
    a = Box3D(loc=(0.3, 1.6, 20.0), dims=(1.5, 1.6, 4.0), ry=0.25)
    b = Box3D(loc=(0.9, 1.2, 20.4), dims=(1.4, 1.7, 3.7), ry=-0.1)
    ra, rb = a.bev(), b.bev()
    bev = _grid_bev_iou(ra, rb)
    inter_bev = bev * (ra.area + rb.area) / (1 + bev)
    overlap_h = min(a.loc[1], b.loc[1]) - max(a.loc[1] - a.h, b.loc[1] - b.h)
    inter = inter_bev * overlap_h
    expected = inter / (a.volume + b.volume - inter)
    assert iou_3d(a, b) == pytest.approx(expected, abs=1e-3)


def test_box_iou_spaces(car_box):
    assert box_iou(car_box, car_box, "bev") == pytest.approx(1.0)
    assert box_iou(car_box, car_box, "3d") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        box_iou(car_box, car_box, "2d")


def test_bev_nms_keeps_best_and_distant():
    boxes = [
        Box3D(loc=(0.0, 1.65, 20.0), dims=(1.5, 1.6, 4.0), ry=0.0, score=0.8),
        Box3D(loc=(0.2, 1.65, 20.0), dims=(1.5, 1.6, 4.0), ry=0.0, score=0.95),
        Box3D(loc=(8.0, 1.65, 20.0), dims=(1.5, 1.6, 4.0), ry=0.0, score=0.5),
    ]
    assert bev_nms(boxes, 0.3) == [1, 2]
    assert bev_nms([], 0.3) == []


def test_bev_nms_equal_scores_keep_input_order():
    boxes = [Box3D(loc=(x, 1.65, 20.0), dims=(1.5, 1.6, 4.0), ry=0.0, score=0.9)
             for x in (0.0, 0.1)]
    assert bev_nms(boxes, 0.3) == [0]
