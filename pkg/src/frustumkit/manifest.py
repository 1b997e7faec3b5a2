"""Dataset manifests: a strict JSON index over clouds, labels, and rects.

A manifest ties together everything the crop-size search and the evaluator
need per frame: a point-cloud file, optional range image, camera intrinsics
and pose, and the labeled objects (category, image rect, oriented box).
Loading is strict — unknown keys, missing files, or categories outside the
declared vocabulary all raise :class:`ManifestError` rather than being
silently tolerated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .cropbox import ObjectSample
from .errors import ManifestError
from .geometry import (
    CameraIntrinsics,
    OrientedBox3,
    Rect2,
    RigidTransform,
    read_cloud_binary,
)
from .scenegen import (
    box_from_json,
    box_to_json,
    check_json_keys,
    intrinsics_from_json,
    intrinsics_to_json,
    pose_from_json,
    pose_to_json,
)

_TOP_KEYS = {"categories", "anchors", "frames"}
_FRAME_KEYS = {"cloud", "range_image", "intrinsics", "pose", "objects"}
_OBJECT_KEYS = {"category", "rect", "box"}
_BOX_KEYS = {"center", "width", "depth", "height", "yaw"}


@dataclass(frozen=True)
class ManifestObject:
    """One labeled object: category, its image rect, and its oriented box."""

    category: str
    rect: Rect2
    box: OrientedBox3


@dataclass(frozen=True)
class ManifestFrame:
    """One frame: cloud path, optional range-image path, camera, labels."""

    cloud_path: Path
    range_image_path: Path | None
    intrinsics: CameraIntrinsics
    pose: RigidTransform
    objects: tuple[ManifestObject, ...]


@dataclass(frozen=True)
class Manifest:
    """A loaded dataset index, with all paths resolved against its directory."""

    root: Path
    categories: tuple[str, ...]
    anchors_path: Path | None
    frames: tuple[ManifestFrame, ...]

    @property
    def n_objects(self) -> int:
        return sum(len(frame.objects) for frame in self.frames)


def _parse_rect(value: object) -> Rect2:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ManifestError("rect must be a list [u_min, v_min, u_max, v_max]")
    try:
        return Rect2(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad rect {value!r}: {exc}") from exc


def _parse_object(entry: object, categories: tuple[str, ...]) -> ManifestObject:
    if not isinstance(entry, dict):
        raise ManifestError("each object must be a JSON object")
    check_json_keys(entry, _OBJECT_KEYS, _OBJECT_KEYS, "manifest object")
    category = entry["category"]
    if category not in categories:
        raise ManifestError(
            f"category {category!r} is not in the declared vocabulary {list(categories)}"
        )
    box_obj = entry["box"]
    if not isinstance(box_obj, dict):
        raise ManifestError("object box must be a JSON object")
    check_json_keys(box_obj, _BOX_KEYS, _BOX_KEYS, "object box")
    try:
        box = box_from_json(box_obj)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad object box: {exc}") from exc
    return ManifestObject(category=category, rect=_parse_rect(entry["rect"]), box=box)


def _resolve_existing(root: Path, rel: object, what: str) -> Path:
    if not isinstance(rel, str) or not rel:
        raise ManifestError(f"{what} must be a non-empty path string")
    path = (root / rel).resolve()
    if not path.is_file():
        raise ManifestError(f"{what} {rel!r} does not exist under {root}")
    return path


def _parse_frame(entry: object, root: Path, categories: tuple[str, ...]) -> ManifestFrame:
    if not isinstance(entry, dict):
        raise ManifestError("each frame must be a JSON object")
    check_json_keys(entry, _FRAME_KEYS, _FRAME_KEYS - {"range_image"}, "manifest frame")
    cloud_path = _resolve_existing(root, entry["cloud"], "frame cloud")
    range_image_path = None
    if "range_image" in entry:
        range_image_path = _resolve_existing(root, entry["range_image"], "frame range image")
    try:
        intrinsics = intrinsics_from_json(entry["intrinsics"])
        pose = pose_from_json(entry["pose"])
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad camera block: {exc}") from exc
    objects_value = entry["objects"]
    if not isinstance(objects_value, list):
        raise ManifestError("frame objects must be a list")
    objects = tuple(_parse_object(obj, categories) for obj in objects_value)
    return ManifestFrame(
        cloud_path=cloud_path,
        range_image_path=range_image_path,
        intrinsics=intrinsics,
        pose=pose,
        objects=objects,
    )


def load_manifest(path: str | Path) -> Manifest:
    """Load and validate a manifest; all relative paths resolve against it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ManifestError("manifest top level must be a JSON object")
    check_json_keys(data, _TOP_KEYS, {"categories", "frames"}, "manifest")
    categories_value = data["categories"]
    if (
        not isinstance(categories_value, list)
        or not categories_value
        or not all(isinstance(c, str) and c for c in categories_value)
    ):
        raise ManifestError("categories must be a non-empty list of names")
    if len(set(categories_value)) != len(categories_value):
        raise ManifestError("categories must be unique")
    categories = tuple(categories_value)
    root = path.resolve().parent
    anchors_path = None
    if "anchors" in data:
        anchors_path = _resolve_existing(root, data["anchors"], "anchors file")
    frames_value = data["frames"]
    if not isinstance(frames_value, list):
        raise ManifestError("frames must be a list")
    frames = tuple(_parse_frame(entry, root, categories) for entry in frames_value)
    return Manifest(root=root, categories=categories, anchors_path=anchors_path, frames=frames)


def manifest_to_json(manifest: Manifest) -> str:
    """Serialize a manifest back to JSON with paths relative to its root."""
    frames = []
    for frame in manifest.frames:
        entry: dict = {
            "cloud": frame.cloud_path.relative_to(manifest.root).as_posix(),
            "intrinsics": intrinsics_to_json(frame.intrinsics),
            "pose": pose_to_json(frame.pose),
            "objects": [
                {
                    "category": obj.category,
                    "rect": [obj.rect.u_min, obj.rect.v_min, obj.rect.u_max, obj.rect.v_max],
                    "box": box_to_json(obj.box),
                }
                for obj in frame.objects
            ],
        }
        if frame.range_image_path is not None:
            entry["range_image"] = frame.range_image_path.relative_to(manifest.root).as_posix()
        frames.append(entry)
    data: dict = {"categories": list(manifest.categories)}
    if manifest.anchors_path is not None:
        data["anchors"] = manifest.anchors_path.relative_to(manifest.root).as_posix()
    data["frames"] = frames
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def iter_object_samples(manifest: Manifest) -> Iterator[ObjectSample]:
    """Yield one :class:`ObjectSample` per labeled object, loading each cloud once."""
    for frame in manifest.frames:
        cloud = read_cloud_binary(frame.cloud_path)
        for obj in frame.objects:
            yield ObjectSample(
                category=obj.category,
                cloud=cloud,
                rect=obj.rect,
                gt_box=obj.box,
                intrinsics=frame.intrinsics,
                pose=frame.pose,
            )
