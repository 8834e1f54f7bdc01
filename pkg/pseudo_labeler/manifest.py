"""
Dataset manifest: frames, their files and the labeled/unlabeled split
"""
import json
import os
from dataclasses import dataclass, field, replace
from typing import List, Optional

from .errors import MalformedManifest

PATH_FIELDS = ("image", "cloud", "calib", "label", "detections")


@dataclass(frozen=True)
class FrameEntry:
    """One frame of a dataset; paths are absolute once loaded"""

    frame_id: str
    has_annotation: bool = False
    image: Optional[str] = None
    cloud: Optional[str] = None
    calib: Optional[str] = None
    label: Optional[str] = None
    detections: Optional[str] = None
    sequence_id: Optional[str] = None
    pseudo: bool = False

    def to_dict(self, base_dir=None):
        d = {"frame_id": self.frame_id, "has_annotation": self.has_annotation}
        for name in PATH_FIELDS:
            value = getattr(self, name)
            if value is not None:
                d[name] = os.path.relpath(value, base_dir) if base_dir else value
        if self.sequence_id is not None:
            d["sequence_id"] = self.sequence_id
        if self.pseudo:
            d["pseudo"] = True
        return d

    @staticmethod
    def from_dict(d, base_dir=None):
        if not isinstance(d, dict):
            raise MalformedManifest("frame entry must be an object")
        frame_id = d.get("frame_id")
        if not isinstance(frame_id, str) or not frame_id:
            raise MalformedManifest("frame_id must be a non-empty string")
        paths = {}
        for name in PATH_FIELDS:
            value = d.get(name)
            if value is None:
                continue
            if not isinstance(value, str):
                raise MalformedManifest(f"{frame_id}: {name} must be a path string")
            paths[name] = os.path.normpath(os.path.join(base_dir, value)) if base_dir else value
        sequence_id = d.get("sequence_id")
        return FrameEntry(
            frame_id=frame_id,
            has_annotation=bool(d.get("has_annotation", False)),
            sequence_id=None if sequence_id is None else str(sequence_id),
            pseudo=bool(d.get("pseudo", False)),
            **paths,
        )


@dataclass(frozen=True)
class DatasetManifest:
    frames: List[FrameEntry] = field(default_factory=list)
    sequence_id: Optional[str] = None

    def __post_init__(self):
        seen = set()
        for frame in self.frames:
            if frame.frame_id in seen:
                raise MalformedManifest(f"duplicate frame_id {frame.frame_id!r}")
            seen.add(frame.frame_id)
            if frame.has_annotation and frame.label is None:
                raise MalformedManifest(f"annotated frame {frame.frame_id!r} has no label path")

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def frame_ids(self):
        return [f.frame_id for f in self.frames]

    @property
    def annotated(self):
        return [f for f in self.frames if f.has_annotation]

    def to_dict(self, base_dir=None):
        d = {"frames": [f.to_dict(base_dir) for f in self.frames]}
        if self.sequence_id is not None:
            d["sequence_id"] = self.sequence_id
        return d

    @staticmethod
    def from_dict(d, base_dir=None):
        if not isinstance(d, dict) or not isinstance(d.get("frames"), list):
            raise MalformedManifest("manifest must be an object with a 'frames' array")
        frames = [FrameEntry.from_dict(f, base_dir) for f in d["frames"]]
        sequence_id = d.get("sequence_id")
        return DatasetManifest(frames, None if sequence_id is None else str(sequence_id))


def parse_manifest(text, base_dir=None):
    try:
        doc = json.loads(text)
    except (ValueError, RecursionError) as e:
        raise MalformedManifest(f"invalid JSON: {e}") from None
    return DatasetManifest.from_dict(doc, base_dir)


def load_manifest(path):
    """Read a manifest; relative paths resolve against its directory"""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_manifest(text, os.path.dirname(os.path.abspath(path)))


def write_manifest(manifest, path):
    """Write with paths relative to the manifest's directory"""
    base_dir = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest.to_dict(base_dir), f, indent=2)
        f.write("\n")


def split_by_sequence(manifest, annotated_sequences):
    """Split into (A, B): frames of annotated sequences keep their labels,
    every other frame becomes unlabeled.
    """
    annotated_sequences = {str(s) for s in annotated_sequences}
    labeled, unlabeled = [], []
    for frame in manifest.frames:
        sequence = frame.sequence_id if frame.sequence_id is not None else manifest.sequence_id
        if sequence in annotated_sequences and frame.label is not None:
            labeled.append(replace(frame, has_annotation=True))
        else:
            unlabeled.append(replace(frame, has_annotation=False, label=None))
    return DatasetManifest(labeled), DatasetManifest(unlabeled)


def sample_labeled_subset(manifest, n, rng):
    """Keep n annotated frames chosen by ``rng``, in manifest order"""
    annotated = manifest.annotated
    if n >= len(annotated):
        return DatasetManifest(annotated, manifest.sequence_id)
    keep = {annotated[i].frame_id for i in rng.sample(len(annotated), n)}
    return DatasetManifest([f for f in annotated if f.frame_id in keep], manifest.sequence_id)
