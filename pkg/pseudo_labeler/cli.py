"""
Command-line entry point.

Exit codes: 0 success, 1 domain error, 2 usage or configuration error.
"""
import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .config import load_config
from .disturb import disturb_labels
from .errors import (
    ConfigError,
    FrameSetMismatch,
    MalformedManifest,
    MissingFile,
    PseudoLabelError,
)
from .evaluate import ap11, ap40, evaluate_frames, format_table, pr_curves_csv, report_to_json
from .geometry import lidar_to_rect
from .kitti_io import (
    parse_calib,
    parse_label_file,
    parse_velodyne,
    read_bytes,
    read_text,
    write_label_file,
)
from .log import configure_logging
from .low_cost import FrameReport, label_frame_files, summarize
from .manifest import DatasetManifest, load_manifest, write_manifest
from .merge import high_acc_assemble
from .synth import SceneSpec, dump_dataset
from .visualize import render_bev_svg, write_svg

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _write_text(path, text):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def _write_json(path, doc):
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _require(path, what):
    if path is None:
        raise MalformedManifest(f"missing {what} path")
    if not os.path.isfile(path):
        raise MissingFile(path)
    return path


def _label_dir_frames(directory):
    """Frame id -> label path for every ``*.txt`` in ``directory``"""
    if not os.path.isdir(directory):
        raise MissingFile(directory)
    return {
        name[:-4]: os.path.join(directory, name)
        for name in sorted(os.listdir(directory))
        if name.endswith(".txt")
    }


# =========================================================================
# lowcost
# =========================================================================

def _lowcost_worker(task):
    """Label one frame in a worker process; never raises domain errors"""
    frame, cfg = task
    try:
        result = label_frame_files(frame, cfg)
    except PseudoLabelError as e:
        return frame.frame_id, None, None, str(e)
    return frame.frame_id, write_label_file(result.records), result.report, None


def _run_frames(worker, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def cmd_lowcost(args, config):
    manifest = load_manifest(_require(args.manifest, "manifest"))
    cfg = config.low_cost
    for frame in manifest:
        _require(frame.cloud, f"{frame.frame_id} cloud")
        _require(frame.calib, f"{frame.frame_id} calib")
        _require(frame.detections, f"{frame.frame_id} detections")

    results = _run_frames(_lowcost_worker, [(f, cfg) for f in manifest], config.jobs)

    label_dir = os.path.join(args.out, "label_2")
    os.makedirs(label_dir, exist_ok=True)
    reports, failed, frames = [], [], []
    for (frame_id, text, report, error), frame in zip(results, manifest):
        if error is not None:
            logger.warning("frame %s failed: %s", frame_id, error)
            failed.append({"frame_id": frame_id, "error": error})
            continue
        path = os.path.join(label_dir, f"{frame_id}.txt")
        _write_text(path, text)
        reports.append(report)
        frames.append(replace(frame, label=os.path.abspath(path), has_annotation=True, pseudo=True))

    total = summarize(reports) if reports else FrameReport(frame_id="total")
    doc = {
        "status": "partial" if failed else "ok",
        "failed_frames": failed,
        "frames": [r.to_dict() for r in reports],
        "total": total.to_dict(),
    }
    _write_json(os.path.join(args.out, "report.json"), doc)
    write_manifest(DatasetManifest(frames, manifest.sequence_id), os.path.join(args.out, "manifest.json"))
    logger.info("lowcost: %d frames, %d labels, %d failed", len(reports), total.n_emitted, len(failed))
    return EXIT_DOMAIN if failed else EXIT_OK


# =========================================================================
# merge
# =========================================================================

def cmd_merge(args, config):
    labeled = load_manifest(_require(args.labeled, "labeled manifest"))
    unlabeled = load_manifest(_require(args.unlabeled, "unlabeled manifest"))
    if not os.path.isdir(args.detections):
        raise MissingFile(args.detections)
    det3d_files = {f.frame_id: os.path.join(args.detections, f"{f.frame_id}.txt") for f in unlabeled}

    cfg = config.high_accuracy
    if args.score_min is not None:
        cfg = replace(cfg, det3d_score_min=args.score_min)
    if args.labeled_subset is not None:
        cfg = replace(cfg, labeled_subset=args.labeled_subset)

    result = high_acc_assemble(labeled, unlabeled, det3d_files, cfg,
                               os.path.join(args.out, "label_2"), seed=config.seed)
    write_manifest(result.manifest, os.path.join(args.out, "manifest.json"))
    _write_json(os.path.join(args.out, "merge_report.json"), result.report.to_dict())
    return EXIT_OK


# =========================================================================
# disturb
# =========================================================================

def cmd_disturb(args, config):
    cfg = config.disturb
    if args.p is not None:
        cfg = replace(cfg, p=args.p)
    if args.groups:
        cfg = replace(cfg, groups=tuple(args.groups))

    files = _label_dir_frames(args.labels)
    outputs = []
    for frame_id, path in files.items():
        records = parse_label_file(read_text(path))
        outputs.append((frame_id, write_label_file(disturb_labels(records, cfg, stream_key=frame_id))))
    for frame_id, text in outputs:
        _write_text(os.path.join(args.out, f"{frame_id}.txt"), text)
    logger.info("disturbed %d label files (p=%s, groups=%s)", len(outputs), cfg.p, ",".join(cfg.groups))
    return EXIT_OK


# =========================================================================
# eval / ap
# =========================================================================

def _paired_frames(pred_dir, gt_dir):
    pred = _label_dir_frames(pred_dir)
    gt = _label_dir_frames(gt_dir)
    if set(pred) != set(gt):
        raise FrameSetMismatch(set(pred) - set(gt), set(gt) - set(pred))
    return [
        (frame_id, parse_label_file(read_text(pred[frame_id])), parse_label_file(read_text(gt[frame_id])))
        for frame_id in sorted(gt)
    ]


def _eval_config(args, config):
    cfg = config.eval
    if args.iou_min is not None:
        cfg = replace(cfg, iou_min=args.iou_min)
    if args.space is not None:
        cfg = replace(cfg, space=args.space)
    if args.ap11:
        cfg = replace(cfg, ap11=True)
    if getattr(args, "heading_agnostic", False):
        cfg = replace(cfg, heading_agnostic=True)
    if getattr(args, "iou_sweep", None):
        cfg = replace(cfg, iou_sweep=tuple(args.iou_sweep))
    return cfg


def cmd_eval(args, config):
    cfg = _eval_config(args, config)
    pairs = _paired_frames(args.pred, args.gt)
    report = evaluate_frames(pairs, cfg, with_ap=args.ap)
    if args.out:
        _write_text(args.out, report_to_json(report))
    if args.pr_csv and report.ap is not None:
        _write_text(args.pr_csv, pr_curves_csv(report.ap))
    sys.stdout.write(format_table(report))
    return EXIT_OK


def cmd_ap(args, config):
    cfg = _eval_config(args, config)
    frames = [(pred, gt) for _, pred, gt in _paired_frames(args.pred, args.gt)]
    metric = ap11 if cfg.ap11 else ap40
    report = metric(frames, cfg.ap_iou, ("bev", "3d"), cfg.category)
    if args.out:
        _write_json(args.out, report.to_dict())
    if args.pr_csv:
        _write_text(args.pr_csv, pr_curves_csv(report))
    for curve in report.curves:
        ap = "-" if curve.ap is None else f"{curve.ap:.4f}"
        sys.stdout.write(f"AP{report.n_points} {curve.space:>3} IoU={curve.iou_min:.2f} "
                         f"{curve.difficulty:<8} {ap}\n")
    return EXIT_OK


# =========================================================================
# synth / render-bev
# =========================================================================

def cmd_synth(args, config):
    cfg = config.synth
    if args.frames is not None:
        cfg = replace(cfg, n_frames=args.frames)
    if args.objects is not None:
        cfg = replace(cfg, n_objects=args.objects)
    if args.masks:
        cfg = replace(cfg, with_masks=True)
    spec = SceneSpec.from_config(cfg, seed=config.seed)
    dump_dataset(spec, cfg.n_frames, args.out, with_labels=not args.no_labels)
    return EXIT_OK


def cmd_render_bev(args, config):
    points = None
    if args.cloud:
        if not args.calib:
            raise ConfigError("--cloud needs --calib")
        cloud = parse_velodyne(read_bytes(_require(args.cloud, "cloud")))
        calib = parse_calib(read_text(_require(args.calib, "calib")), camera=config.low_cost.camera)
        points = lidar_to_rect(cloud, calib)
    pred = parse_label_file(read_text(_require(args.pred, "labels"))) if args.pred else []
    gt = parse_label_file(read_text(_require(args.gt, "ground truth"))) if args.gt else []
    svg = render_bev_svg(
        points,
        [r for r in pred if not r.is_dont_care],
        [r for r in gt if not r.is_dont_care],
        title=args.title,
    )
    write_svg(svg, args.out)
    return EXIT_OK


# =========================================================================
# Parser
# =========================================================================

def _add_eval_flags(p):
    p.add_argument("--pred", required=True, help="Directory of predicted label files")
    p.add_argument("--gt", required=True, help="Directory of ground truth label files")
    p.add_argument("-o", "--out", default=None, help="JSON report path")
    p.add_argument("--pr-csv", default=None, help="Write precision-recall samples as CSV")
    p.add_argument("--iou-min", type=float, default=None)
    p.add_argument("--space", choices=("bev", "3d"), default=None)
    p.add_argument("--ap11", action="store_true", help="Use the legacy 11-point AP")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pseudo-labeler",
        description="LiDAR pseudo labels: generation, merging, disturbance and evaluation",
    )
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="Seed for every random stage")
    parser.add_argument("--jobs", type=int, default=None, help="Worker processes (default 1)")
    parser.add_argument("--log-level", default=None, help="Overrides $LPCG_LOG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lowcost", help="Generate pseudo labels from LiDAR and 2D detections")
    p.add_argument("--manifest", required=True)
    p.add_argument("-o", "--out", required=True, help="Output directory")
    p.set_defaults(func=cmd_lowcost)

    p = sub.add_parser("merge", help="Merge labeled frames with filtered 3D detections")
    p.add_argument("--labeled", required=True, help="Manifest of the annotated split")
    p.add_argument("--unlabeled", required=True, help="Manifest of the unlabeled split")
    p.add_argument("--detections", required=True, help="Directory of <frame_id>.txt 3D detections")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--score-min", type=float, default=None)
    p.add_argument("--labeled-subset", type=int, default=None,
                   help="Keep only this many annotated frames")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("disturb", help="Randomly scale label values")
    p.add_argument("--labels", required=True, help="Directory of label files")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("-p", type=float, default=None, help="Disturbance range, e.g. 0.05")
    p.add_argument("--groups", nargs="+", default=None,
                   choices=("location", "dimension", "orientation"))
    p.set_defaults(func=cmd_disturb)

    p = sub.add_parser("eval", help="TP/FP/FN and mean relative errors of pseudo labels")
    _add_eval_flags(p)
    p.add_argument("--ap", action="store_true", help="Add AP rows")
    p.add_argument("--heading-agnostic", action="store_true",
                   help="Compare orientations modulo pi")
    p.add_argument("--iou-sweep", type=float, nargs="+", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ap", help="KITTI average precision")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_ap)

    p = sub.add_parser("synth", help="Write a synthetic dataset with ground truth")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("-n", "--frames", type=int, default=None)
    p.add_argument("--objects", type=int, default=None)
    p.add_argument("--masks", action="store_true", help="Emit polygon masks")
    p.add_argument("--no-labels", action="store_true", help="Do not write ground truth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render-bev", help="Draw a frame in bird's-eye view as SVG")
    p.add_argument("--cloud", default=None)
    p.add_argument("--calib", default=None)
    p.add_argument("--pred", default=None, help="Label file drawn as predictions")
    p.add_argument("--gt", default=None, help="Label file drawn as ground truth")
    p.add_argument("--title", default=None)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_render_bev)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    configure_logging(args.log_level)

    try:
        config = load_config(args.config).with_overrides(seed=args.seed, jobs=args.jobs)
        return args.func(args, config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PseudoLabelError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
