"""
Step-by-step visualization for debugging the low cost pipeline.

Passed as the labeler's debug callback, a StepVisualizer writes one SVG
per pipeline stage and detection, which makes it easy to see where a
detection was dropped or a box came out wrong.
"""
import os
from typing import Dict, List

from .low_cost import low_cost_label_frame
from .visualize import render_layers, write_svg


class StepVisualizer:
    """
    Usage:
        vis = StepVisualizer(output_dir="./debug_output")
        low_cost_label_frame(cloud, calib, dets, cfg, debug_callback=vis)
        vis.files  # written SVG paths, in pipeline order
    """

    # Color palette for the cluster stage, cycled by cluster id
    CLUSTER_COLORS = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
        "#8c564b", "#e377c2", "#17becf", "#bcbd22",
    ]
    NOISE_COLOR = "#bbbbbb"

    def __init__(self, output_dir="./debug_output", width=800, height=800):
        self.output_dir = output_dir
        self.width = width
        self.height = height
        os.makedirs(output_dir, exist_ok=True)
        self.files: List[str] = []
        self.decisions: Dict[int, str] = {}

    def __call__(self, step_number, step_name, labeler):
        svg = self.visualize_step(step_number, step_name, labeler)
        if svg is None:
            return
        if step_number == 6:
            filename = f"step_{step_number}_{step_name}.svg"
        else:
            filename = f"det{labeler.detection_index:03d}_step_{step_number}_{step_name}.svg"
        path = os.path.join(self.output_dir, filename)
        write_svg(svg, path)
        self.files.append(path)

    def run(self, cloud, calib, detections, cfg=None):
        """Label one frame, writing every stage"""
        return low_cost_label_frame(cloud, calib, detections, cfg, debug_callback=self)

    # =========================================================================
    # Stage renderings
    # =========================================================================

    def visualize_step(self, step_number, step_name, labeler):
        title = f"Step {step_number}: {step_name}"
        if step_number == 1:
            layers = [("points", "point", labeler.roi_points)]
        elif step_number == 2:
            layers = self._cluster_layers(labeler)
        elif step_number == 3:
            layers = [("points", "point", labeler.roi_points),
                      ("points", "target", labeler.target_points)]
        elif step_number in (4, 5):
            css_class = "pred"
            if step_number == 5:
                accepted = labeler.accepts(labeler.box, labeler.detection.category)
                css_class = "pred" if accepted else "rejected"
                self.decisions[labeler.detection_index] = "kept" if accepted else "filtered"
            layers = [("points", "target", labeler.target_points),
                      ("rects", css_class, [labeler.box])]
        elif step_number == 6:
            layers = [("points", "point", labeler.points_rect),
                      ("rects", "rejected", [c.box for c in labeler.candidates
                                             if c not in labeler.labels]),
                      ("rects", "pred", [label.box for label in labeler.labels])]
        else:
            return None
        style = self._cluster_style(labeler) if step_number == 2 else ()
        return render_layers(layers, self.width, self.height, title, extra_style=style)

    def _cluster_layers(self, labeler):
        clustering = labeler.clustering
        layers = []
        for cluster_id in range(clustering.n_clusters):
            layers.append(("points", f"cluster-{cluster_id}",
                           labeler.roi_points[clustering.members(cluster_id)]))
        layers.append(("points", "noise", labeler.roi_points[clustering.labels < 0]))
        return layers

    def _cluster_style(self, labeler):
        colors = self.CLUSTER_COLORS
        rules = [f"    .cluster-{i} {{ fill: {colors[i % len(colors)]}; }}"
                 for i in range(labeler.clustering.n_clusters)]
        rules.append(f"    .noise {{ fill: {self.NOISE_COLOR}; }}")
        return rules
