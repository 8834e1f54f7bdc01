#!/usr/bin/env python3
"""
Debug script for step-by-step visualization of low cost labeling.

Generates a synthetic scene (or reads one frame from disk), runs the
pipeline with a StepVisualizer attached and writes one SVG per stage.

Usage:
    python debug_lowcost.py [options]

Options:
    -s, --seed SEED       Scene seed (default: 12345)
    -n, --objects N       Objects in the synthetic scene (default: 3)
    --faces K             Keep at most K visible faces per object
    --frame CLOUD CALIB DETECTIONS
                          Debug a real frame instead of a synthetic one
    -o, --output DIR      Output directory (default: ./debug_output)
"""
import argparse
import os
import sys

from pseudo_labeler.config import LowCostConfig
from pseudo_labeler.kitti_io import load_frame_inputs
from pseudo_labeler.log import configure_logging
from pseudo_labeler.step_visualizer import StepVisualizer
from pseudo_labeler.synth import SceneSpec, generate_scene


def main():
    parser = argparse.ArgumentParser(
        description='Debug low cost labeling with step-by-step visualization'
    )
    parser.add_argument('-s', '--seed', type=int, default=12345,
                        help='Scene seed (default: 12345)')
    parser.add_argument('-n', '--objects', type=int, default=3,
                        help='Objects in the synthetic scene (default: 3)')
    parser.add_argument('--faces', type=int, default=None,
                        help='Keep at most this many visible faces per object')
    parser.add_argument('--frame', nargs=3, metavar=('CLOUD', 'CALIB', 'DETECTIONS'),
                        default=None, help='Debug a frame read from disk')
    parser.add_argument('-o', '--output', type=str, default='./debug_output',
                        help='Output directory (default: ./debug_output)')
    args = parser.parse_args()
    configure_logging()

    print("=" * 60)
    print("Low cost labeling - Debug Visualization")
    print("=" * 60)

    if args.frame:
        cloud, calib, detections = load_frame_inputs(*args.frame)
        print(f"Frame: {args.frame[0]}")
    else:
        spec = SceneSpec(seed=args.seed, n_objects=args.objects, max_visible_faces=args.faces)
        scene = generate_scene(spec)
        cloud, calib, detections = scene.cloud, scene.calib, scene.detections
        print(f"Seed: {args.seed}")
        print(f"Objects: {len(scene.boxes)} (visible faces: {scene.visible_faces})")
    print(f"Points: {len(cloud)}")
    print(f"Detections: {len(detections)}")
    print(f"Output: {args.output}")
    print("=" * 60)

    vis = StepVisualizer(output_dir=args.output)
    result = vis.run(cloud, calib, detections, LowCostConfig())

    print("\nReport:")
    for name, value in result.report.to_dict().items():
        print(f"  {name}: {value}")
    for index, decision in sorted(vis.decisions.items()):
        print(f"  detection {index}: {decision}")

    print("\nGenerated files:")
    for path in vis.files:
        print(f"  - {os.path.basename(path)} ({os.path.getsize(path):,} bytes)")
    return 0


if __name__ == '__main__':
    sys.exit(main())
