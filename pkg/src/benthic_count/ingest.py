"""Bit-exact file interfaces: detections and ground truth in, reports out.

Detection file (JSON, UTF-8)::

    {
      "schema_version": 1,
      "video": "dive-03",
      "fps": 59.0,                      # optional
      "image_size": [640, 480],         # optional [width, height]
      "frames": [
        {"index": 0, "detections": [
          {"bbox": [x, y, w, h], "score": 0.9, "polygon": [[x, y], ...]}
        ]}
      ]
    }

Ground truth has the same shape with "objects" instead of "detections";
each object drops "score" and carries a "label" (the single supported
class is "live_oyster"). bbox is [x, y, w, h] with a top-left origin, NOT
corner pairs. Frame indices must be strictly increasing, box sizes
strictly positive, scores in [0, 1]; violations are reported with the
offending frame index and detection ordinal. Unknown fields are ignored
and files without "schema_version" are read as version 1.

Serialization is canonical: fixed key order, floats limited to 6
significant digits, newline-terminated — equal values give equal bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .geometry import BBox, PolygonMask
from .tracking import CountReport, Detection

SCHEMA_VERSION = 1
OYSTER_LABEL = "live_oyster"


class ParseError(ValueError):
    """Input file violates the schema; message carries the location."""


@dataclass
class DetectionFrame:
    index: int
    detections: list[Detection]


@dataclass
class DetectionFile:
    video: str
    frames: list[DetectionFrame]
    fps: float | None = None
    image_size: tuple[int, int] | None = None

    def by_index(self) -> dict[int, list[Detection]]:
        return {f.index: f.detections for f in self.frames}


@dataclass
class GroundTruthObject:
    bbox: BBox
    label: str
    mask: PolygonMask | None = None


@dataclass
class GroundTruthFrame:
    index: int
    objects: list[GroundTruthObject]


@dataclass
class GroundTruthFile:
    video: str
    frames: list[GroundTruthFrame]
    fps: float | None = None
    image_size: tuple[int, int] | None = None

    def by_index(self) -> dict[int, list[GroundTruthObject]]:
        return {f.index: f.objects for f in self.frames}


def _load_json(data: bytes | str, what: str) -> dict:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"{what} is not UTF-8: {e}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"{what} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{what} must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}")
    return doc


def _common_header(doc: dict) -> tuple[str, float | None, tuple[int, int] | None]:
    video = doc.get("video", "")
    if not isinstance(video, str):
        raise ParseError("'video' must be a string")
    fps = doc.get("fps")
    if fps is not None:
        if not isinstance(fps, (int, float)) or fps <= 0:
            raise ParseError(f"'fps' must be a positive number, got {fps!r}")
        fps = float(fps)
    size = doc.get("image_size")
    if size is not None:
        if (not isinstance(size, list) or len(size) != 2
                or not all(isinstance(v, int) and v > 0 for v in size)):
            raise ParseError(f"'image_size' must be [width, height], got {size!r}")
        size = (size[0], size[1])
    return video, fps, size


def _parse_bbox(raw, where: str) -> BBox:
    if not isinstance(raw, list) or len(raw) != 4 \
            or not all(isinstance(v, (int, float)) for v in raw):
        raise ParseError(f"{where}: bbox must be [x, y, w, h]")
    x, y, w, h = (float(v) for v in raw)
    if w <= 0 or h <= 0:
        raise ParseError(f"{where}: bbox size must be positive")
    return BBox(x, y, w, h)


def _parse_polygon(raw, where: str) -> PolygonMask | None:
    if raw is None:
        return None
    if (not isinstance(raw, list) or len(raw) < 3
            or not all(isinstance(p, list) and len(p) == 2
                       and all(isinstance(v, (int, float)) for v in p) for p in raw)):
        raise ParseError(f"{where}: polygon must be [[x, y], ...] with >= 3 points")
    return PolygonMask(tuple((float(p[0]), float(p[1])) for p in raw))


def _iter_frames(doc: dict) -> Iterable[dict]:
    frames = doc.get("frames")
    if not isinstance(frames, list):
        raise ParseError("'frames' must be a list")
    prev = -1
    for pos, frame in enumerate(frames):
        if not isinstance(frame, dict) or not isinstance(frame.get("index"), int):
            raise ParseError(f"frames[{pos}]: missing integer 'index'")
        idx = frame["index"]
        if idx < 0 or idx <= prev:
            raise ParseError(
                f"frames[{pos}]: index {idx} must be strictly increasing and >= 0"
            )
        prev = idx
        yield frame


def parse_detections(data: bytes | str) -> DetectionFile:
    doc = _load_json(data, "detection file")
    video, fps, size = _common_header(doc)
    frames = []
    for frame in _iter_frames(doc):
        idx = frame["index"]
        raw_dets = frame.get("detections", [])
        if not isinstance(raw_dets, list):
            raise ParseError(f"frame {idx}: 'detections' must be a list")
        dets = []
        for j, raw in enumerate(raw_dets):
            where = f"frame {idx} detection {j}"
            if not isinstance(raw, dict):
                raise ParseError(f"{where}: must be an object")
            bbox = _parse_bbox(raw.get("bbox"), where)
            score = raw.get("score", 1.0)
            if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
                raise ParseError(f"{where}: score out of range")
            dets.append(Detection(bbox, float(score),
                                  _parse_polygon(raw.get("polygon"), where)))
        frames.append(DetectionFrame(idx, dets))
    return DetectionFile(video, frames, fps, size)


def parse_ground_truth(data: bytes | str) -> GroundTruthFile:
    doc = _load_json(data, "ground truth file")
    video, fps, size = _common_header(doc)
    frames = []
    for frame in _iter_frames(doc):
        idx = frame["index"]
        raw_objs = frame.get("objects", [])
        if not isinstance(raw_objs, list):
            raise ParseError(f"frame {idx}: 'objects' must be a list")
        objs = []
        for j, raw in enumerate(raw_objs):
            where = f"frame {idx} object {j}"
            if not isinstance(raw, dict):
                raise ParseError(f"{where}: must be an object")
            bbox = _parse_bbox(raw.get("bbox"), where)
            label = raw.get("label")
            if not isinstance(label, str) or not label:
                raise ParseError(f"{where}: label must be a nonempty string")
            objs.append(GroundTruthObject(bbox, label,
                                          _parse_polygon(raw.get("polygon"), where)))
        frames.append(GroundTruthFrame(idx, objs))
    return GroundTruthFile(video, frames, fps, size)


# ---- canonical serialization -------------------------------------------------


def _round6(value):
    """Clamp floats to 6 significant digits, recursively."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: _round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round6(v) for v in value]
    return value


def canonical_json(payload: dict) -> bytes:
    """Deterministic bytes: insertion order kept, compact, newline-terminated."""
    return (json.dumps(_round6(payload), separators=(",", ":"),
                       ensure_ascii=False) + "\n").encode("utf-8")


def report_payload(report: CountReport) -> dict:
    return {
        "total_count": report.total_count,
        "tracks": [
            {"id": t.id, "birth_frame": t.birth_frame,
             "last_frame": t.last_frame, "hits": t.hits}
            for t in report.tracks
        ],
        "per_frame_active": list(report.per_frame_active),
    }


def write_report(report: CountReport) -> bytes:
    """Canonical CountReport bytes; identical reports give identical bytes."""
    return canonical_json(report_payload(report))


def detections_payload(df: DetectionFile) -> dict:
    payload: dict = {"schema_version": SCHEMA_VERSION, "video": df.video}
    if df.fps is not None:
        payload["fps"] = df.fps
    if df.image_size is not None:
        payload["image_size"] = list(df.image_size)
    payload["frames"] = [
        {"index": f.index, "detections": [
            _det_payload(d) for d in f.detections
        ]} for f in df.frames
    ]
    return payload


def _det_payload(d: Detection) -> dict:
    out = {"bbox": d.bbox.as_list(), "score": d.score}
    if d.mask is not None:
        out["polygon"] = [[x, y] for x, y in d.mask.vertices]
    return out


def serialize_detections(df: DetectionFile) -> bytes:
    return canonical_json(detections_payload(df))


def ground_truth_payload(gt: GroundTruthFile) -> dict:
    payload: dict = {"schema_version": SCHEMA_VERSION, "video": gt.video}
    if gt.fps is not None:
        payload["fps"] = gt.fps
    if gt.image_size is not None:
        payload["image_size"] = list(gt.image_size)
    payload["frames"] = [
        {"index": f.index, "objects": [
            _gt_payload(o) for o in f.objects
        ]} for f in gt.frames
    ]
    return payload


def _gt_payload(o: GroundTruthObject) -> dict:
    out = {"bbox": o.bbox.as_list(), "label": o.label}
    if o.mask is not None:
        out["polygon"] = [[x, y] for x, y in o.mask.vertices]
    return out


def serialize_ground_truth(gt: GroundTruthFile) -> bytes:
    return canonical_json(ground_truth_payload(gt))


# ---- frame sources -----------------------------------------------------------


@dataclass
class FrameSource:
    """Ordered, dimension-consistent image sequence; items decode to grayscale."""

    paths: list[Path]
    width: int
    height: int

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, i: int) -> np.ndarray:
        with Image.open(self.paths[i]) as img:
            return np.asarray(img.convert("L"), dtype=np.uint8)


IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def load_frames(source: str | Path | Sequence[str | Path]) -> FrameSource:
    """Build a FrameSource from a directory or an explicit path list.

    Directory contents are sorted lexicographically by filename. Every image
    must decode and share one (width, height); failures name the file.
    """
    if isinstance(source, (str, Path)):
        root = Path(source)
        if not root.is_dir():
            raise ParseError(f"frame directory not found: {root}")
        paths = sorted(p for p in root.iterdir()
                       if p.suffix.lower() in IMAGE_SUFFIXES)
    else:
        paths = [Path(p) for p in source]
    if not paths:
        raise ParseError("no frames found")

    width = height = None
    for p in paths:
        try:
            with Image.open(p) as img:
                w, h = img.size
        except (UnidentifiedImageError, OSError) as e:
            raise ParseError(f"cannot decode frame {p}: {e}") from None
        if width is None:
            width, height = w, h
        elif (w, h) != (width, height):
            raise ParseError(
                f"frame {p} is {w}x{h}, expected {width}x{height}"
            )
    return FrameSource(paths, width, height)
