"""Converters onto the counting pipeline's wire formats.

Two inputs, one output family:

* labelme-style annotation documents -> ground truth JSON
  (frames carry "objects" with bbox/label/polygon);
* stored prediction dumps -> detections JSON
  (frames carry "detections" with bbox/score and optional polygon).

Prediction dump format (one JSON document)::

    {"images": [
      {"image": "00001.png", "detections": [
        {"bbox": [x, y, w, h], "score": 0.9},
        {"score": 0.8, "polygon": [[x, y], ...]},
        {"score": 0.7, "mask": {"width": W, "height": H, "counts": [...]}}
      ]}
    ]}

Bitmasks become polygons by tracing the largest component's pixel
boundary (see masks module); a detection without an explicit bbox gets
the tight box of its polygon. Emitted bytes are canonical: fixed key
order, floats up to 6 significant digits, newline-terminated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .masks import decode_mask, mask_to_polygon

SCHEMA_VERSION = 1
DEFAULT_LABEL = "live_oyster"


class ConversionError(ValueError):
    pass


@dataclass
class LabelmeDocument:
    image_path: str
    width: int
    height: int
    shapes: list[tuple[str, list[list[float]]]] = field(default_factory=list)

    @classmethod
    def from_dict(cls, doc: dict, origin: str = "<memory>") -> "LabelmeDocument":
        try:
            width = int(doc["imageWidth"])
            height = int(doc["imageHeight"])
        except (KeyError, TypeError, ValueError):
            raise ConversionError(f"{origin}: missing imageWidth/imageHeight") from None
        shapes = []
        for k, shape in enumerate(doc.get("shapes", [])):
            label = shape.get("label")
            points = shape.get("points")
            if not label:
                raise ConversionError(f"{origin}: shape {k} has no label")
            if not isinstance(points, list) or len(points) < 3:
                raise ConversionError(
                    f"{origin}: shape {k} needs >= 3 polygon points")
            shapes.append((label, [[float(p[0]), float(p[1])] for p in points]))
        return cls(doc.get("imagePath", origin), width, height, shapes)

    @classmethod
    def load(cls, path: str | Path) -> "LabelmeDocument":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConversionError(f"cannot read {path}: {e}") from None
        return cls.from_dict(doc, origin=str(path))


def _canonical(payload: dict) -> bytes:
    def round6(v):
        if isinstance(v, float):
            return float(f"{v:.6g}")
        if isinstance(v, dict):
            return {k: round6(x) for k, x in v.items()}
        if isinstance(v, list):
            return [round6(x) for x in v]
        return v

    return (json.dumps(round6(payload), separators=(",", ":"),
                       ensure_ascii=False) + "\n").encode("utf-8")


def _polygon_bbox(points: list[list[float]]) -> list[float]:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return [min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)]


def convert_labelme(docs: list[LabelmeDocument],
                    label: str = DEFAULT_LABEL,
                    video: str = "labelme") -> bytes:
    """Ground truth JSON: one frame per document, matching-label shapes only.

    Polygon coordinates pass through exactly as annotated (canonical float
    formatting never alters values representable in 6 significant digits;
    labelme tools emit pixel coordinates, which are).
    """
    sizes = {(d.width, d.height) for d in docs}
    if len(sizes) > 1:
        raise ConversionError(f"inconsistent image dimensions: {sorted(sizes)}")
    frames = []
    for index, doc in enumerate(docs):
        objects = []
        for shape_label, points in doc.shapes:
            if shape_label != label:
                continue
            objects.append({
                "bbox": _polygon_bbox(points),
                "label": shape_label,
                "polygon": points,
            })
        frames.append({"index": index, "objects": objects})
    payload: dict = {"schema_version": SCHEMA_VERSION, "video": video}
    if sizes:
        w, h = sizes.pop()
        payload["image_size"] = [w, h]
    payload["frames"] = frames
    return _canonical(payload)


def _convert_detection(raw: dict, where: str) -> dict:
    score = raw.get("score", 1.0)
    if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
        raise ConversionError(f"{where}: score out of range")
    polygon = raw.get("polygon")
    if polygon is None and "mask" in raw:
        try:
            bits = decode_mask(raw["mask"])
            polygon = [[x, y] for x, y in mask_to_polygon(bits)]
        except ValueError as e:
            raise ConversionError(f"{where}: {e}") from None
    bbox = raw.get("bbox")
    if bbox is None:
        if polygon is None:
            raise ConversionError(f"{where}: needs bbox, polygon, or mask")
        bbox = _polygon_bbox(polygon)
    bbox = [float(v) for v in bbox]
    if len(bbox) != 4 or bbox[2] <= 0 or bbox[3] <= 0:
        raise ConversionError(f"{where}: bbox must be [x, y, w, h] with w, h > 0")
    out = {"bbox": bbox, "score": float(score)}
    if polygon is not None:
        out["polygon"] = [[float(p[0]), float(p[1])] for p in polygon]
    return out


def export_detections(dump: dict, frame_ordering: list[str] | dict[str, int] | None = None,
                      video: str = "export") -> bytes:
    """Detections JSON from a prediction dump.

    Frame indices come from ``frame_ordering`` (a name list, position =
    index, or an explicit name -> index map); by default images take their
    dump order. Every dump image must resolve to an index.
    """
    images = dump.get("images")
    if not isinstance(images, list):
        raise ConversionError("dump needs an 'images' list")
    if frame_ordering is None:
        resolve = {img.get("image", str(k)): k for k, img in enumerate(images)}
    elif isinstance(frame_ordering, dict):
        resolve = dict(frame_ordering)
    else:
        resolve = {name: k for k, name in enumerate(frame_ordering)}

    frames = {}
    for k, img in enumerate(images):
        name = img.get("image", str(k))
        if name not in resolve:
            raise ConversionError(f"image {name!r} has no frame index")
        index = resolve[name]
        if index in frames:
            raise ConversionError(f"frame index {index} assigned twice")
        dets = [
            _convert_detection(raw, f"image {name!r} detection {j}")
            for j, raw in enumerate(img.get("detections", []))
        ]
        frames[index] = dets

    payload = {
        "schema_version": SCHEMA_VERSION,
        "video": video,
        "frames": [{"index": i, "detections": frames[i]} for i in sorted(frames)],
    }
    return _canonical(payload)


def load_dump(path: str | Path) -> dict:
    """Load a dump from one JSON file or a directory of per-image JSONs.

    Directory entries sort by filename; each file is either a full image
    record or a bare detection list (the filename stem becomes the image
    name).
    """
    path = Path(path)
    if path.is_file():
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConversionError(f"cannot parse {path}: {e}") from None
    if not path.is_dir():
        raise ConversionError(f"dump not found: {path}")
    images = []
    for entry in sorted(path.glob("*.json")):
        try:
            doc = json.loads(entry.read_text())
        except json.JSONDecodeError as e:
            raise ConversionError(f"cannot parse {entry}: {e}") from None
        if isinstance(doc, list):
            doc = {"image": entry.stem, "detections": doc}
        doc.setdefault("image", entry.stem)
        images.append(doc)
    return {"images": images}
