"""Axis-aligned boxes, polygon masks, rasterization, and IoU.

Shared geometric vocabulary for detection-track association and metric
evaluation. Boxes are continuous ``(x, y, w, h)`` with a top-left origin;
integer pixel grids appear only at rasterization time. All values are
immutable after construction and every operation is pure, so everything
here is safe to use from multiple threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner (x, y) and size (w, h), in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) with x2 = x + w, y2 = y + h."""
        return self.x, self.y, self.x + self.w, self.y + self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


def iou_box(a: BBox, b: BBox) -> float:
    """Intersection area over union area of two boxes; 0.0 when disjoint."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class PolygonMask:
    """Simple polygon as an ordered vertex ring [(x, y), ...], at least 3 vertices."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValueError(f"polygon needs >= 3 vertices, got {len(verts)}")
        object.__setattr__(self, "vertices", verts)

    def area(self) -> float:
        """Shoelace area (absolute value)."""
        v = np.asarray(self.vertices)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def bounding_box(self) -> BBox:
        v = np.asarray(self.vertices)
        x1, y1 = v.min(axis=0)
        x2, y2 = v.max(axis=0)
        return BBox(float(x1), float(y1), float(x2 - x1), float(y2 - y1))

    def _is_degenerate(self) -> bool:
        # all vertices collinear (covers repeated points): zero area everywhere
        v = np.asarray(self.vertices)
        d = v - v[0]
        ref = None
        for row in d[1:]:
            if row[0] != 0 or row[1] != 0:
                ref = row
                break
        if ref is None:
            return True
        cross = d[:, 0] * ref[1] - d[:, 1] * ref[0]
        return bool(np.all(cross == 0))


@dataclass(frozen=True)
class BitMask:
    """Row-major binary pixel grid of shape (height, width)."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise ValueError(
                f"bits shape {bits.shape} does not match {self.height}x{self.width}"
            )
        object.__setattr__(self, "bits", bits)

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitMask)
            and self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )


def rasterize(poly: PolygonMask, width: int, height: int) -> BitMask:
    """Fill ``poly`` on a width x height grid, even-odd rule, pixel-center sampling.

    Pixel (row i, col j) is set iff its center (j + 0.5, i + 0.5) lies inside
    the polygon. Deterministic for fixed inputs. A degenerate (zero-area)
    polygon rasterizes to an empty mask and raises a warning.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"grid must be positive, got {width}x{height}")
    if poly._is_degenerate():
        warnings.warn("degenerate polygon rasterizes to an empty mask", stacklevel=2)
        return BitMask(width, height, np.zeros((height, width), dtype=bool))

    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    px, py = np.meshgrid(xs, ys)  # (height, width)
    inside = np.zeros((height, width), dtype=bool)
    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if y1 == y2:
            continue  # horizontal edges never cross a scan ray
        crosses = (y1 > py) != (y2 > py)
        xhit = (x2 - x1) * (py - y1) / (y2 - y1) + x1
        inside ^= crosses & (px < xhit)
    return BitMask(width, height, inside)


def iou_mask(a: BitMask, b: BitMask) -> float:
    """|a AND b| / |a OR b|; 0.0 when both masks are empty."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = int(np.logical_and(a.bits, b.bits).sum())
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        return 0.0
    return inter / union
