import os

import numpy as np
import pytest

from pseudo_labeler.boxes import Box3D
from pseudo_labeler.geometry import project_to_image
from pseudo_labeler.kitti_io import CalibBundle, Detection2D, LabelRecord, parse_calib

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURES, name)


def read_fixture(name, mode="r"):
    with open(fixture_path(name), mode) as f:
        return f.read()


def make_record(category="Car", loc=(0.0, 1.65, 20.0), dims=(1.5, 1.6, 4.0), ry=0.0,
                bbox2d=(500.0, 150.0, 600.0, 200.0), truncation=0.0, occlusion=0, score=None):
    return LabelRecord(
        category=category,
        truncation=truncation,
        occlusion=occlusion,
        alpha=0.0,
        bbox2d=tuple(bbox2d),
        dims=tuple(dims),
        loc=tuple(loc),
        ry=ry,
        score=score,
    )


def two_face_points(box, n_per_face=200, seed=0, faces=2):
    """Points on the faces of ``box`` turned towards the origin, most facing
    first. Heights are uniform, positions along a face are stratified.
    """
    rng = np.random.default_rng(seed)
    bottom = box.corners()[:4][:, [0, 2]]
    center = np.array([box.loc[0], box.loc[2]])
    scored = []
    for i in range(4):
        a, b = bottom[i], bottom[(i + 1) % 4]
        mid = (a + b) / 2
        normal = (mid - center) / np.linalg.norm(mid - center)
        scored.append((float(normal @ (-mid / np.linalg.norm(mid))), a, b))
    scored.sort(key=lambda item: -item[0])
    chunks = []
    for _, a, b in scored[:faces]:
        t = (np.arange(n_per_face) + rng.random(n_per_face)) / n_per_face
        s = rng.random(n_per_face)
        bev = a[None, :] + t[:, None] * (b - a)[None, :]
        y = box.loc[1] - s * box.h
        chunks.append(np.stack([bev[:, 0], y, bev[:, 1]], axis=1))
    return np.vstack(chunks)


def detection_for(box, calib, category="Car", score=0.95):
    """Perfect 2D detection: image box of the projected corners"""
    uv = project_to_image(box.corners(), calib.P2)[:, :2]
    bbox = (float(uv[:, 0].min()), float(uv[:, 1].min()),
            float(uv[:, 0].max()), float(uv[:, 1].max()))
    return Detection2D(bbox2d=bbox, category=category, score=score)


@pytest.fixture
def calib_text():
    return read_fixture("calib_000000.txt")


@pytest.fixture
def label_text():
    return read_fixture("label_000000.txt")


@pytest.fixture
def kitti_calib(calib_text):
    return parse_calib(calib_text)


@pytest.fixture
def canonical_calib():
    return CalibBundle.canonical()


@pytest.fixture
def car_box():
    return Box3D(loc=(2.0, 1.65, 20.0), dims=(1.5, 1.6, 3.9), ry=0.3)
