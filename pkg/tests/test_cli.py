import json
import os
import xml.etree.ElementTree as ET

import pytest

from pseudo_labeler.cli import main
from pseudo_labeler.config import SynthConfig
from pseudo_labeler.kitti_io import parse_label_file, write_label_file
from pseudo_labeler.manifest import DatasetManifest, FrameEntry, load_manifest, write_manifest
from pseudo_labeler.synth import SceneSpec, generate_scene, recovery_trial

from .conftest import make_record


def _synth(out_dir, frames=4, objects=2, seed=3):
    assert main(["--seed", str(seed), "synth", "-o", str(out_dir), "-n", str(frames),
                 "--objects", str(objects)]) == 0
    return out_dir / "manifest.json"


def _read_dir(directory):
    return {name: (directory / name).read_bytes() for name in sorted(os.listdir(directory))}


@pytest.fixture
def dataset(tmp_path):
    return _synth(tmp_path / "data")


def test_lowcost_writes_labels_and_report(tmp_path, dataset):
    out = tmp_path / "out"
    assert main(["lowcost", "--manifest", str(dataset), "-o", str(out)]) == 0

    labels = sorted(os.listdir(out / "label_2"))
    assert labels == [f"{i:06d}.txt" for i in range(4)]
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "ok"
    assert report["failed_frames"] == []
    n_lines = sum(len(parse_label_file((out / "label_2" / name).read_text())) for name in labels)
    assert report["total"]["n_emitted"] == n_lines
    assert report["total"]["n_emitted"] == sum(f["n_emitted"] for f in report["frames"])
    assert report["total"]["n_detections"] == 8

    manifest = load_manifest(str(out / "manifest.json"))
    assert all(f.pseudo and f.has_annotation for f in manifest)


def test_lowcost_is_independent_of_jobs(tmp_path):
    dataset = _synth(tmp_path / "data", frames=20, objects=3, seed=11)
    assert main(["--jobs", "1", "lowcost", "--manifest", str(dataset), "-o", str(tmp_path / "j1")]) == 0
    assert main(["--jobs", "8", "lowcost", "--manifest", str(dataset), "-o", str(tmp_path / "j8")]) == 0
    assert _read_dir(tmp_path / "j1" / "label_2") == _read_dir(tmp_path / "j8" / "label_2")
    assert (tmp_path / "j1" / "report.json").read_bytes() == (tmp_path / "j8" / "report.json").read_bytes()


def test_lowcost_empty_manifest(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text('{"frames": []}')
    out = tmp_path / "out"
    assert main(["lowcost", "--manifest", str(path), "-o", str(out)]) == 0
    assert os.listdir(out / "label_2") == []
    assert json.loads((out / "report.json").read_text())["total"]["n_emitted"] == 0


def test_lowcost_missing_file(tmp_path, dataset, capsys):
    os.remove(tmp_path / "data" / "calib" / "000002.txt")
    out = tmp_path / "out"
    assert main(["lowcost", "--manifest", str(dataset), "-o", str(out)]) == 1
    assert "MissingFile" in capsys.readouterr().err
    assert not out.exists()


def test_lowcost_partial_run(tmp_path, dataset):
    (tmp_path / "data" / "velodyne" / "000001.bin").write_bytes(bytes(17))
    out = tmp_path / "out"
    assert main(["lowcost", "--manifest", str(dataset), "-o", str(out)]) == 1
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "partial"
    assert [f["frame_id"] for f in report["failed_frames"]] == ["000001"]
    assert sorted(os.listdir(out / "label_2")) == ["000000.txt", "000002.txt", "000003.txt"]


def test_eval_ground_truth_against_itself(tmp_path, dataset, capsys):
    gt = tmp_path / "data" / "label_2"
    out = tmp_path / "eval.json"
    assert main(["eval", "--pred", str(gt), "--gt", str(gt), "-o", str(out), "--ap"]) == 0
    report = json.loads(out.read_text())
    assert (report["tp"], report["fp"], report["fn"]) == (8, 0, 0)
    assert report["mre"]["loc_mre"] == [0.0, 0.0, 0.0]
    assert "TP" in capsys.readouterr().out


def test_synth_lowcost_eval_agrees_with_recovery(tmp_path):
    dataset = _synth(tmp_path / "data", frames=6, objects=3, seed=5)
    pred = tmp_path / "pseudo"
    assert main(["lowcost", "--manifest", str(dataset), "-o", str(pred)]) == 0
    out = tmp_path / "eval.json"
    assert main(["eval", "--pred", str(pred / "label_2"), "--gt", str(tmp_path / "data" / "label_2"),
                 "-o", str(out)]) == 0
    report = json.loads(out.read_text())

    spec = SceneSpec.from_config(SynthConfig(n_frames=6, n_objects=3), seed=5)
    trials = [recovery_trial(spec, scene=generate_scene(spec, key=("frame", i))) for i in range(6)]
    recovered = sum(t.recovered for t in trials)
    emitted = sum(len(t.labels) for t in trials)
    assert report["tp"] == recovered
    assert report["fp"] == emitted - recovered
    assert report["fn"] == 18 - recovered
    assert recovered > 0


def test_eval_frame_set_mismatch(tmp_path, dataset, capsys):
    gt = tmp_path / "data" / "label_2"
    pred = tmp_path / "pred"
    pred.mkdir()
    (pred / "999999.txt").write_text("")
    assert main(["eval", "--pred", str(pred), "--gt", str(gt)]) == 1
    assert "frame sets differ" in capsys.readouterr().err


def test_ap_command(tmp_path, dataset, capsys):
    gt = tmp_path / "data" / "label_2"
    csv_path = tmp_path / "pr.csv"
    assert main(["ap", "--pred", str(gt), "--gt", str(gt), "--pr-csv", str(csv_path)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert len(rows) == 12
    assert all(row.startswith("AP40") for row in rows)
    assert csv_path.exists()


def test_disturb_zero_is_identity(tmp_path, dataset):
    gt = tmp_path / "data" / "label_2"
    out = tmp_path / "disturbed"
    assert main(["disturb", "--labels", str(gt), "-o", str(out), "-p", "0"]) == 0
    assert _read_dir(out) == _read_dir(gt)


def test_disturb_changes_selected_groups(tmp_path, dataset):
    gt = tmp_path / "data" / "label_2"
    out = tmp_path / "disturbed"
    assert main(["--seed", "1", "disturb", "--labels", str(gt), "-o", str(out),
                 "-p", "0.2", "--groups", "dimension"]) == 0
    before = parse_label_file((gt / "000000.txt").read_text())
    after = parse_label_file((out / "000000.txt").read_text())
    assert [r.loc for r in after] == [r.loc for r in before]
    assert [r.dims for r in after] != [r.dims for r in before]


def test_config_seed_matches_seed_flag(tmp_path, dataset):
    gt = tmp_path / "data" / "label_2"
    config = tmp_path / "config.json"
    config.write_text('{"seed": 9}')
    assert main(["--config", str(config), "disturb", "--labels", str(gt), "-o", str(tmp_path / "a"),
                 "-p", "0.2"]) == 0
    assert main(["--seed", "9", "disturb", "--labels", str(gt), "-o", str(tmp_path / "b"),
                 "-p", "0.2"]) == 0
    assert _read_dir(tmp_path / "a") == _read_dir(tmp_path / "b")
    assert main(["disturb", "--labels", str(gt), "-o", str(tmp_path / "c"), "-p", "0.2"]) == 0
    assert _read_dir(tmp_path / "a") != _read_dir(tmp_path / "c")


def test_merge_command(tmp_path, dataset):
    det_dir = tmp_path / "det3d"
    det_dir.mkdir()
    (det_dir / "b0.txt").write_text(write_label_file([make_record(score=0.9),
                                                      make_record(score=0.2)]))
    unlabeled = tmp_path / "unlabeled.json"
    write_manifest(DatasetManifest([FrameEntry("b0")]), str(unlabeled))
    out = tmp_path / "merged"

    assert main(["merge", "--labeled", str(dataset), "--unlabeled", str(unlabeled),
                 "--detections", str(det_dir), "-o", str(out)]) == 0
    merged = load_manifest(str(out / "manifest.json"))
    assert merged.frame_ids == ["000000", "000001", "000002", "000003", "b0"]
    assert len(parse_label_file((out / "label_2" / "b0.txt").read_text())) == 1
    report = json.loads((out / "merge_report.json").read_text())
    assert report["n_kept"] == 1


def test_render_bev(tmp_path, dataset):
    data = tmp_path / "data"
    out = tmp_path / "frame.svg"
    assert main(["render-bev", "--cloud", str(data / "velodyne" / "000000.bin"),
                 "--calib", str(data / "calib" / "000000.txt"),
                 "--gt", str(data / "label_2" / "000000.txt"), "-o", str(out)]) == 0
    root = ET.parse(out).getroot()
    polygons = root.findall(".//{http://www.w3.org/2000/svg}polygon")
    assert len(polygons) == 2


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["lowcost"],
    ["--jobs", "0", "synth", "-o", "unused"],
])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_bad_config_file(tmp_path, dataset):
    config = tmp_path / "config.json"
    config.write_text('{"low_cost": {"det2d_score_min": 3}}')
    assert main(["--config", str(config), "lowcost", "--manifest", str(dataset),
                 "-o", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out").exists()


def test_config_file_is_used(tmp_path, dataset):
    config = tmp_path / "config.json"
    config.write_text('{"low_cost": {"det2d_score_min": 1.0}}')
    out = tmp_path / "out"
    # synthetic detections have score 1.0 and still pass an inclusive threshold
    assert main(["--config", str(config), "lowcost", "--manifest", str(dataset), "-o", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total"]["n_below_score"] == 0
