"""Detection metrics and counting accuracy.

Predictions are matched to ground truth greedily in descending score
order; a prediction is a true positive when its best available IoU is
strictly greater than the threshold ("greater than", not >=; pass
strict=False for the >= convention used by COCO tooling). AP is the
101-point interpolated area under the precision-recall curve, and the
headline AP averages the ten IoU thresholds 0.50, 0.55, ..., 0.95.

Counting accuracy between pipeline and manual counts is the mean of
min/max ratios per video, which is symmetric and equals 1 only on exact
agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BBox, BitMask, iou_box, iou_mask, rasterize
from .ingest import DetectionFile, GroundTruthFile

IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    score_threshold: float


@dataclass
class ApResult:
    ap: float
    ap50: float
    ap75: float
    per_threshold: dict[float, float]
    curves: dict[float, list[PRPoint]] = field(default_factory=dict)


def _iou_matrix(preds, gts) -> np.ndarray:
    """Pairwise IoU; all geometries must be BBox or all BitMask."""
    kinds = {type(g) for g in preds} | {type(g) for g in gts}
    if not kinds:
        return np.zeros((len(preds), len(gts)))
    if kinds == {BBox}:
        fn = iou_box
    elif kinds == {BitMask}:
        fn = iou_mask
    else:
        raise ValueError(f"mixed geometry kinds: {sorted(k.__name__ for k in kinds)}")
    out = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            out[i, j] = fn(p, g)
    return out


def match_predictions(preds: list[tuple[object, float]], gts: list[object],
                      iou_threshold: float, *, strict: bool = True
                      ) -> tuple[MatchCounts, list[bool]]:
    """Score-ordered greedy matching of predictions onto ground truth.

    Returns (counts, flags) with flags[i] = True iff prediction i is a true
    positive. Predictions are visited in descending score (ties keep input
    order) and take the still-unmatched ground truth of highest IoU when it
    clears the threshold; everything else is a false positive, and leftover
    ground truths are false negatives.
    """
    geoms = [g for g, _ in preds]
    iou = _iou_matrix(geoms, gts)
    order = sorted(range(len(preds)), key=lambda i: -preds[i][1])
    flags = [False] * len(preds)
    taken = [False] * len(gts)
    for i in order:
        best_j, best_v = -1, 0.0
        for j in range(len(gts)):
            if taken[j]:
                continue
            v = iou[i, j]
            if v > best_v:
                best_j, best_v = j, v
        ok = best_v > iou_threshold if strict else best_v >= iou_threshold
        if best_j >= 0 and ok:
            taken[best_j] = True
            flags[i] = True
    tp = sum(flags)
    return MatchCounts(tp=tp, fp=len(preds) - tp, fn=len(gts) - tp), flags


def pr_curve(flags: list[bool], n_gt: int,
             scores: list[float] | None = None) -> list[PRPoint]:
    """Cumulative precision/recall after each prediction, best-scored first."""
    if n_gt < 1:
        raise ValueError("pr_curve needs at least one ground-truth object")
    points = []
    tp = 0
    for k, flag in enumerate(flags, start=1):
        tp += bool(flag)
        points.append(PRPoint(
            recall=tp / n_gt,
            precision=tp / k,
            score_threshold=scores[k - 1] if scores is not None else math.nan,
        ))
    return points


def average_precision(curve: list[PRPoint]) -> float:
    """101-point interpolated AP: mean over recall grid {0, 0.01, ..., 1} of
    the maximum precision achieved at recall >= r."""
    if not curve:
        raise ValueError("average_precision needs a nonempty curve")
    rec = np.array([p.recall for p in curve])
    prec = np.array([p.precision for p in curve])
    # running max of precision from each point to the end
    pmax = np.maximum.accumulate(prec[::-1])[::-1]
    total = 0.0
    for i in range(101):
        r = i / 100
        idx = int(np.searchsorted(rec, r, side="left"))
        if idx < len(rec):
            total += pmax[idx]
    return total / 101


def _mask_canvas(preds: DetectionFile, gts: GroundTruthFile) -> tuple[int, int]:
    sizes = {s for s in (preds.image_size, gts.image_size) if s is not None}
    if len(sizes) > 1:
        raise ValueError(f"image_size disagrees between files: {sorted(sizes)}")
    if sizes:
        return sizes.pop()
    max_x = max_y = 0.0
    for frame in preds.frames:
        for d in frame.detections:
            geom = d.mask.bounding_box() if d.mask is not None else d.bbox
            max_x = max(max_x, geom.x + geom.w)
            max_y = max(max_y, geom.y + geom.h)
    for frame in gts.frames:
        for o in frame.objects:
            geom = o.mask.bounding_box() if o.mask is not None else o.bbox
            max_x = max(max_x, geom.x + geom.w)
            max_y = max(max_y, geom.y + geom.h)
    return int(math.ceil(max_x)) + 1, int(math.ceil(max_y)) + 1


def evaluate(preds: DetectionFile, gts: GroundTruthFile, geometry: str = "box",
             *, strict: bool = True) -> ApResult:
    """Pool predictions across frames and compute AP over the IoU threshold grid.

    geometry="box" compares bounding boxes; "mask" rasterizes instance
    polygons (required on every prediction and ground truth) onto a shared
    canvas taken from image_size, or from the joint extent when absent.
    Every predicted frame index must exist in the ground truth.
    """
    if geometry not in ("box", "mask"):
        raise ValueError(f"geometry must be 'box' or 'mask', got {geometry!r}")
    gt_frames = gts.by_index()
    missing = [f.index for f in preds.frames if f.index not in gt_frames]
    if missing:
        raise ValueError(f"prediction frames missing from ground truth: {missing}")

    if geometry == "mask":
        width, height = _mask_canvas(preds, gts)

        def to_geom(bbox, mask, where):
            if mask is None:
                raise ValueError(f"{where}: mask geometry requires a polygon")
            return rasterize(mask, width, height)
    else:
        def to_geom(bbox, mask, where):
            return bbox

    frame_preds: dict[int, list[tuple[object, float]]] = {}
    for frame in preds.frames:
        frame_preds[frame.index] = [
            (to_geom(d.bbox, d.mask, f"frame {frame.index} detection {j}"), d.score)
            for j, d in enumerate(frame.detections)
        ]
    frame_gts: dict[int, list[object]] = {}
    for frame in gts.frames:
        frame_gts[frame.index] = [
            to_geom(o.bbox, o.mask, f"frame {frame.index} object {j}")
            for j, o in enumerate(frame.objects)
        ]
    n_gt = sum(len(v) for v in frame_gts.values())

    per_threshold: dict[float, float] = {}
    curves: dict[float, list[PRPoint]] = {}
    for t in IOU_THRESHOLDS:
        pooled: list[tuple[float, int, int, bool]] = []  # (-score, frame, ordinal, tp)
        for idx in sorted(frame_preds):
            _counts, flags = match_predictions(
                frame_preds[idx], frame_gts[idx], t, strict=strict)
            for j, flag in enumerate(flags):
                pooled.append((-frame_preds[idx][j][1], idx, j, flag))
        pooled.sort()
        if not pooled or n_gt == 0:
            per_threshold[t] = 0.0
            curves[t] = []
            continue
        flags = [tp for _, _, _, tp in pooled]
        scores = [-s for s, _, _, _ in pooled]
        curve = pr_curve(flags, n_gt, scores)
        per_threshold[t] = average_precision(curve)
        curves[t] = curve

    values = list(per_threshold.values())
    return ApResult(
        ap=sum(values) / len(values),
        ap50=per_threshold[0.5],
        ap75=per_threshold[0.75],
        per_threshold=per_threshold,
        curves=curves,
    )


def counting_accuracy(counted: list[int], manual: list[int]) -> float:
    """Mean over samples of min(counted, manual) / max(counted, manual)."""
    if len(counted) != len(manual) or not counted:
        raise ValueError("need equal-length, nonempty count lists")
    if any(c <= 0 for c in counted) or any(m <= 0 for m in manual):
        raise ValueError("counts must be positive")
    return sum(min(c, m) / max(c, m) for c, m in zip(counted, manual)) / len(counted)


def ap_payload(result: ApResult) -> dict:
    """Canonical JSON payload for an ApResult (curves are not serialized)."""
    return {
        "ap": result.ap,
        "ap50": result.ap50,
        "ap75": result.ap75,
        "per_threshold": {f"{t:.2f}": v for t, v in sorted(result.per_threshold.items())},
    }
