"""Counting static objects in moving-camera video by tracking detections."""

from .geometry import BBox, BitMask, PolygonMask, iou_box, iou_mask, rasterize
from .kcf import KcfModel, KcfParams, tracker_init, tracker_update
from .tracking import (
    AssociationResult,
    CountReport,
    Detection,
    MultiObjectTracker,
    Track,
    TrackerConfig,
    associate,
)

__all__ = [
    "BBox",
    "BitMask",
    "PolygonMask",
    "iou_box",
    "iou_mask",
    "rasterize",
    "KcfModel",
    "KcfParams",
    "tracker_init",
    "tracker_update",
    "AssociationResult",
    "CountReport",
    "Detection",
    "MultiObjectTracker",
    "Track",
    "TrackerConfig",
    "associate",
]

__version__ = "0.1.0"
