"""Multi-object tracking by detection.

Per frame: correlation-filter trackers predict where known objects moved,
detections are greedily matched to those predictions by IoU, matched
tracks snap to their detection and relearn there, unmatched detections
spawn new tracks, and tracks that go unmatched too long are removed.
The final count is the number of track IDs ever assigned (filtered by a
minimum hit count, 1 by default).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import BBox, PolygonMask, iou_box
from .kcf import KcfModel, KcfParams, tracker_init, tracker_update

THREADS_ENV = "BENTHIC_COUNT_THREADS"

ACTIVE = "active"
REMOVED = "removed"


def thread_cap() -> int:
    """Worker cap for per-track updates; BENTHIC_COUNT_THREADS, 0/unset = auto."""
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


@dataclass
class Detection:
    """One detector output: box, confidence, optional instance polygon."""

    bbox: BBox
    score: float = 1.0
    mask: PolygonMask | None = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass
class Track:
    """One tracked object and its lifecycle counters."""

    id: int
    bbox: BBox
    model: KcfModel
    hits: int = 1
    misses: int = 0
    birth_frame: int = 0
    last_frame: int = 0
    state: str = ACTIVE


@dataclass(frozen=True)
class TrackerConfig:
    iou_threshold: float = 0.2
    max_misses: int = 10
    score_threshold: float = 0.5
    min_hits_to_count: int = 1
    kcf: KcfParams = field(default_factory=KcfParams)

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")
        if self.max_misses < 1:
            raise ValueError("max_misses must be >= 1")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0, 1]")
        if self.min_hits_to_count < 1:
            raise ValueError("min_hits_to_count must be >= 1")


@dataclass(frozen=True)
class AssociationResult:
    matches: list[tuple[int, int, float]]  # (track_id, detection_index, iou)
    unmatched_detections: list[int]
    unmatched_tracks: list[int]


@dataclass(frozen=True)
class TrackSummary:
    id: int
    birth_frame: int
    last_frame: int
    hits: int


@dataclass(frozen=True)
class CountReport:
    total_count: int
    tracks: list[TrackSummary]
    per_frame_active: list[int]


def associate(detections: list[Detection], track_boxes: list[tuple[int, BBox]],
              threshold: float) -> AssociationResult:
    """Greedy max-IoU matching; a pair matches only when IoU > threshold.

    Candidate pairs are taken in descending IoU order, ties broken by lower
    track id then lower detection index; each track and each detection joins
    at most one match.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    candidates = []
    for tid, tbox in track_boxes:
        for di, det in enumerate(detections):
            v = iou_box(tbox, det.bbox)
            if v > threshold:
                candidates.append((-v, tid, di))
    candidates.sort()

    matches: list[tuple[int, int, float]] = []
    used_tracks: set[int] = set()
    used_dets: set[int] = set()
    for neg_iou, tid, di in candidates:
        if tid in used_tracks or di in used_dets:
            continue
        used_tracks.add(tid)
        used_dets.add(di)
        matches.append((tid, di, -neg_iou))
    return AssociationResult(
        matches=matches,
        unmatched_detections=[i for i in range(len(detections)) if i not in used_dets],
        unmatched_tracks=[tid for tid, _ in track_boxes if tid not in used_tracks],
    )


class MultiObjectTracker:
    """Stateful tracker: feed frames in order with step(), then finalize()."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []  # every track ever created
        self.next_id = 1
        self.last_frame_index = -1
        self.per_frame_active: list[int] = []

    def active_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.state == ACTIVE]

    def step(self, frame_index: int, frame: np.ndarray,
             detections: list[Detection]) -> AssociationResult:
        """Process one frame. frame_index must increase by exactly 1 per call.

        Detection indices in the returned AssociationResult refer to the
        ``detections`` argument; detections below the score threshold are
        dropped up front and appear nowhere in the result.
        """
        if frame_index != self.last_frame_index + 1:
            raise ValueError(
                f"frame_index {frame_index} out of order, expected "
                f"{self.last_frame_index + 1}"
            )
        self.last_frame_index = frame_index
        cfg = self.config

        kept = [(i, d) for i, d in enumerate(detections) if d.score >= cfg.score_threshold]
        active = self.active_tracks()

        # phase 2: correlation-filter prediction, parallel across tracks
        updates = _map_tracks(lambda t: tracker_update(t.model, frame), active)
        for track, (bbox, _peak, model) in zip(active, updates):
            track.bbox = bbox
            track.model = model

        local = associate([d for _, d in kept],
                          [(t.id, t.bbox) for t in active], cfg.iou_threshold)
        by_id = {t.id: t for t in active}
        matches = []
        matched_dets = set()
        for tid, local_di, iou in local.matches:
            orig_di, det = kept[local_di]
            track = by_id[tid]
            track.bbox = det.bbox
            track.model = tracker_init(frame, det.bbox, cfg.kcf)
            track.hits += 1
            track.misses = 0
            track.last_frame = frame_index
            matches.append((tid, orig_di, iou))
            matched_dets.add(orig_di)

        unmatched_dets = []
        for local_di in local.unmatched_detections:
            orig_di, det = kept[local_di]
            self.tracks.append(Track(
                id=self.next_id,
                bbox=det.bbox,
                model=tracker_init(frame, det.bbox, cfg.kcf),
                hits=1,
                misses=0,
                birth_frame=frame_index,
                last_frame=frame_index,
            ))
            self.next_id += 1
            unmatched_dets.append(orig_di)

        for tid in local.unmatched_tracks:
            track = by_id[tid]
            track.misses += 1
            if track.misses >= cfg.max_misses:
                track.state = REMOVED

        self.per_frame_active.append(len(self.active_tracks()))
        return AssociationResult(matches, unmatched_dets, local.unmatched_tracks)

    def finalize(self) -> CountReport:
        """Count every track ever assigned with hits >= min_hits_to_count."""
        counted = sum(1 for t in self.tracks if t.hits >= self.config.min_hits_to_count)
        return CountReport(
            total_count=counted,
            tracks=[TrackSummary(t.id, t.birth_frame, t.last_frame, t.hits)
                    for t in self.tracks],
            per_frame_active=list(self.per_frame_active),
        )


def _map_tracks(fn, tracks):
    workers = min(thread_cap(), len(tracks))
    if workers <= 1:
        return [fn(t) for t in tracks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tracks))


def run_pipeline(frames, detection_frames: dict[int, list[Detection]],
                 config: TrackerConfig | None = None) -> CountReport:
    """Drive a tracker over an indexable frame sequence and finalize.

    ``detection_frames`` maps frame index -> detections; frames without an
    entry get none.
    """
    tracker = MultiObjectTracker(config)
    for i in range(len(frames)):
        tracker.step(i, frames[i], detection_frames.get(i, []))
    return tracker.finalize()
