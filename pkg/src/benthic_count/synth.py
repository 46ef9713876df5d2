"""Deterministic synthetic scenes with a known object count.

A scene is a large textured "seafloor" world with static elliptical
objects and a camera window that pans across it at constant velocity.
Each frame yields ground truth (every object at least half inside the
window, box clipped to the frame) and detections derived from that truth
under a configurable corruption model: per-detection dropout, Gaussian
box jitter, and uniformly placed false positives. Identical specs give
bit-identical frames, truth, and detections; see the rng module for the
generator contract.

Substream tags (all derived from SceneSpec.seed): 1 placement,
2 object textures, 3 background texture, 4+frame pixel noise,
5 corruption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BBox
from .ingest import (
    OYSTER_LABEL,
    DetectionFile,
    DetectionFrame,
    GroundTruthFile,
    GroundTruthFrame,
    GroundTruthObject,
    serialize_detections,
    serialize_ground_truth,
)
from .rng import PortableRng, counter_gauss_field, counter_uniform_field, derive_key
from .tracking import Detection

PLACEMENT_TAG = 1
TEXTURE_TAG = 2
BACKGROUND_TAG = 3
FRAME_NOISE_TAG = 4
CORRUPTION_TAG = 5

MAX_PLACEMENT_TRIES = 10_000
VISIBILITY_FRACTION = 0.5

BACKGROUND_MEAN = 128.0
BACKGROUND_SPREAD = 12.0
OBJECT_SPREAD = 35.0


class PlacementError(ValueError):
    """Rejection sampling could not fit the requested objects."""


@dataclass(frozen=True)
class NoiseSpec:
    detection_dropout_prob: float = 0.0
    bbox_jitter_sigma: float = 0.0
    false_positive_rate: float = 0.0
    pixel_noise_sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.detection_dropout_prob <= 1.0:
            raise ValueError("detection_dropout_prob must be in [0, 1]")
        if min(self.bbox_jitter_sigma, self.false_positive_rate,
               self.pixel_noise_sigma) < 0:
            raise ValueError("noise magnitudes must be >= 0")


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    n_objects: int
    object_size_range: tuple[int, int]
    world_size: tuple[int, int]  # (W, H)
    camera_size: tuple[int, int]  # (w, h)
    camera_velocity: tuple[float, float]
    n_frames: int
    camera_start: tuple[float, float] = (0.0, 0.0)
    min_separation: float = 0.0
    objects: tuple[tuple[float, float, float, float], ...] | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.n_objects < 0 or self.n_frames < 1:
            raise ValueError("need n_objects >= 0 and n_frames >= 1")
        lo, hi = self.object_size_range
        if not (0 < lo <= hi):
            raise ValueError(f"bad object_size_range {self.object_size_range}")
        ww, wh = self.world_size
        cw, ch = self.camera_size
        if cw > ww or ch > wh:
            raise ValueError("camera larger than world")
        for t in (0, self.n_frames - 1):
            x = self.camera_start[0] + t * self.camera_velocity[0]
            y = self.camera_start[1] + t * self.camera_velocity[1]
            if not (0 <= x <= ww - cw and 0 <= y <= wh - ch):
                raise ValueError(
                    f"camera leaves the world at frame {t}: origin ({x}, {y})"
                )
        if self.objects is not None:
            object.__setattr__(
                self, "objects",
                tuple(tuple(float(v) for v in ob) for ob in self.objects))


@dataclass
class SynthScene:
    frames: list[np.ndarray]  # uint8 grayscale (H, W)
    truth: GroundTruthFile
    detections: DetectionFile
    true_count: int
    object_boxes: list[BBox]


def _boxes_conflict(a: BBox, b: BBox, gap: float) -> bool:
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    return not (ax2 + gap <= bx1 or bx2 + gap <= ax1
                or ay2 + gap <= by1 or by2 + gap <= ay1)


def _place_objects(spec: SceneSpec) -> list[BBox]:
    if spec.objects is not None:
        boxes = [BBox(*ob) for ob in spec.objects]
        ww, wh = spec.world_size
        for b in boxes:
            if b.x < 0 or b.y < 0 or b.x + b.w > ww or b.y + b.h > wh:
                raise ValueError(f"explicit object {b} outside the world")
        return boxes
    rng = PortableRng(derive_key(spec.seed, PLACEMENT_TAG))
    lo, hi = spec.object_size_range
    ww, wh = spec.world_size
    boxes: list[BBox] = []
    for _ in range(spec.n_objects):
        for attempt in range(MAX_PLACEMENT_TRIES):
            w = rng.randint(lo, hi)
            h = rng.randint(lo, hi)
            x = rng.randint(0, ww - w)
            y = rng.randint(0, wh - h)
            cand = BBox(float(x), float(y), float(w), float(h))
            if not any(_boxes_conflict(cand, b, spec.min_separation) for b in boxes):
                boxes.append(cand)
                break
        else:
            raise PlacementError(
                f"could not place object {len(boxes) + 1}/{spec.n_objects} "
                f"after {MAX_PLACEMENT_TRIES} attempts"
            )
    return boxes


def _object_mean(k: int, n: int) -> float:
    """Distinct per-object mean intensities, kept away from the background."""
    m = 40.0 + 176.0 * k / max(n, 1)
    return m + 56.0 if m > 100.0 else m


def _render_world(spec: SceneSpec, boxes: list[BBox]) -> np.ndarray:
    ww, wh = spec.world_size
    bg = counter_uniform_field(derive_key(spec.seed, BACKGROUND_TAG), ww * wh)
    world = BACKGROUND_MEAN + BACKGROUND_SPREAD * (2.0 * bg - 1.0)
    world = world.reshape(wh, ww)
    for k, b in enumerate(boxes):
        x0, y0 = int(b.x), int(b.y)
        w, h = int(round(b.w)), int(round(b.h))
        tex = counter_uniform_field(derive_key(spec.seed, TEXTURE_TAG, k), w * h)
        tex = _object_mean(k, len(boxes)) + OBJECT_SPREAD * (2.0 * tex.reshape(h, w) - 1.0)
        # elliptical footprint inscribed in the box
        yy, xx = np.mgrid[0:h, 0:w]
        ell = (((xx + 0.5) - w / 2) / (w / 2)) ** 2 + (((yy + 0.5) - h / 2) / (h / 2)) ** 2
        inside = ell <= 1.0
        patch = world[y0:y0 + h, x0:x0 + w]
        patch[inside] = tex[inside]
    return world


def _camera_origin(spec: SceneSpec, t: int) -> tuple[int, int]:
    x = spec.camera_start[0] + t * spec.camera_velocity[0]
    y = spec.camera_start[1] + t * spec.camera_velocity[1]
    return int(math.floor(x)), int(math.floor(y))


def _visible_box(b: BBox, ox: int, oy: int, cw: int, ch: int) -> BBox | None:
    """Clip to the window when at least half the object area is inside."""
    x1 = max(b.x, ox)
    y1 = max(b.y, oy)
    x2 = min(b.x + b.w, ox + cw)
    y2 = min(b.y + b.h, oy + ch)
    if x2 <= x1 or y2 <= y1:
        return None
    if (x2 - x1) * (y2 - y1) < VISIBILITY_FRACTION * b.area:
        return None
    return BBox(x1 - ox, y1 - oy, x2 - x1, y2 - y1)


def generate(spec: SceneSpec) -> SynthScene:
    """Render frames, per-frame truth, corrupted detections, and the true count."""
    boxes = _place_objects(spec)
    world = _render_world(spec, boxes)
    cw, ch = spec.camera_size

    frames: list[np.ndarray] = []
    truth_frames: list[GroundTruthFrame] = []
    seen: set[int] = set()
    for t in range(spec.n_frames):
        ox, oy = _camera_origin(spec, t)
        crop = world[oy:oy + ch, ox:ox + cw]
        if spec.noise.pixel_noise_sigma > 0:
            noise = counter_gauss_field(
                derive_key(spec.seed, FRAME_NOISE_TAG, t), cw * ch)
            crop = crop + spec.noise.pixel_noise_sigma * noise.reshape(ch, cw)
        frames.append(np.clip(crop, 0, 255).astype(np.uint8))

        objs = []
        for k, b in enumerate(boxes):
            vis = _visible_box(b, ox, oy, cw, ch)
            if vis is not None:
                objs.append(GroundTruthObject(vis, OYSTER_LABEL))
                seen.add(k)
        truth_frames.append(GroundTruthFrame(t, objs))

    truth = GroundTruthFile(
        video=f"synth-{spec.seed}", frames=truth_frames, image_size=(cw, ch))
    detections = corrupt(truth, spec.noise, derive_key(spec.seed, CORRUPTION_TAG),
                         size_range=spec.object_size_range)
    return SynthScene(frames, truth, detections, len(seen), boxes)


def corrupt(truth: GroundTruthFile, noise: NoiseSpec, seed: int,
            size_range: tuple[int, int] = (8, 32)) -> DetectionFile:
    """Derive detections from ground truth under the corruption model.

    Per frame, in order: each object draws one dropout uniform; survivors
    draw four jitter gaussians (x, y, w, h); then a Poisson count of false
    positives is drawn, each consuming four placement uniforms. All draws
    come from one sequential stream, so output is a pure function of
    (truth, noise, seed).
    """
    rng = PortableRng(seed)
    cw, ch = truth.image_size if truth.image_size else (None, None)
    frames: list[DetectionFrame] = []
    for frame in truth.frames:
        dets: list[Detection] = []
        for obj in frame.objects:
            if noise.detection_dropout_prob > 0 and \
                    rng.uniform() < noise.detection_dropout_prob:
                continue
            b = obj.bbox
            if noise.bbox_jitter_sigma > 0:
                s = noise.bbox_jitter_sigma
                b = BBox(
                    b.x + rng.gauss(0.0, s),
                    b.y + rng.gauss(0.0, s),
                    max(1.0, b.w + rng.gauss(0.0, s)),
                    max(1.0, b.h + rng.gauss(0.0, s)),
                )
            dets.append(Detection(b, 1.0))
        if noise.false_positive_rate > 0 and cw is not None:
            lo, hi = size_range
            for _ in range(rng.poisson(noise.false_positive_rate)):
                w = float(rng.randint(lo, min(hi, cw)))
                h = float(rng.randint(lo, min(hi, ch)))
                x = rng.uniform_range(0.0, cw - w)
                y = rng.uniform_range(0.0, ch - h)
                dets.append(Detection(BBox(x, y, w, h), 1.0))
        frames.append(DetectionFrame(frame.index, dets))
    return DetectionFile(video=truth.video, frames=frames,
                         image_size=truth.image_size)


def write_scene(scene: SynthScene, out_dir: str | Path) -> None:
    """Write frames/ PNGs plus truth.json and detections.json."""
    out = Path(out_dir)
    frame_dir = out / "frames"
    frame_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(scene.frames):
        Image.fromarray(frame, mode="L").save(frame_dir / f"{i:05d}.png")
    (out / "truth.json").write_bytes(serialize_ground_truth(scene.truth))
    (out / "detections.json").write_bytes(serialize_detections(scene.detections))


def spec_from_dict(doc: dict) -> SceneSpec:
    """Build a SceneSpec from parsed JSON (the `synth --spec` file format)."""
    noise = NoiseSpec(**doc.get("noise", {}))
    fields = dict(
        seed=doc["seed"],
        n_objects=doc["n_objects"],
        object_size_range=tuple(doc["object_size_range"]),
        world_size=tuple(doc["world_size"]),
        camera_size=tuple(doc["camera_size"]),
        camera_velocity=tuple(doc["camera_velocity"]),
        n_frames=doc["n_frames"],
        noise=noise,
    )
    if "camera_start" in doc:
        fields["camera_start"] = tuple(doc["camera_start"])
    if "min_separation" in doc:
        fields["min_separation"] = doc["min_separation"]
    if doc.get("objects") is not None:
        fields["objects"] = tuple(tuple(ob) for ob in doc["objects"])
    return SceneSpec(**fields)
