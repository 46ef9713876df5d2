"""Bitmask to polygon conversion by exact pixel-boundary tracing.

A binary mask's largest 4-connected component is outlined on the pixel
CORNER lattice (vertices at integer coordinates), not through pixel
centers: rasterizing the resulting polygon with pixel-center sampling
recovers the component exactly, so round-trip mask IoU is 1.0 for solid
shapes instead of losing a half-pixel rim the way center-line contours
do. Interior holes are not traced; the outer ring fills them.
"""

from __future__ import annotations

from collections import deque

import numpy as np

# screen coordinates: x right, y down; direction codes E, S, W, N.
# interior lies to the RIGHT of travel, so a pinch vertex resolves by
# preferring the sharpest right turn (keeps hugging the same region).
DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def largest_component(bits: np.ndarray) -> np.ndarray:
    """Mask of the largest 4-connected component; ties go to the one whose
    first pixel comes earliest in row-major order."""
    bits = np.asarray(bits, dtype=bool)
    h, w = bits.shape
    seen = np.zeros_like(bits)
    best: np.ndarray | None = None
    best_size = 0
    for i in range(h):
        for j in range(w):
            if not bits[i, j] or seen[i, j]:
                continue
            comp = np.zeros_like(bits)
            queue = deque([(i, j)])
            seen[i, j] = comp[i, j] = True
            size = 0
            while queue:
                ci, cj = queue.popleft()
                size += 1
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ni, nj = ci + di, cj + dj
                    if 0 <= ni < h and 0 <= nj < w and bits[ni, nj] \
                            and not seen[ni, nj]:
                        seen[ni, nj] = comp[ni, nj] = True
                        queue.append((ni, nj))
            if size > best_size:
                best, best_size = comp, size
    if best is None:
        raise ValueError("mask has no set pixels")
    return best


def _boundary_edges(bits: np.ndarray) -> dict:
    """Directed boundary edges keyed by start vertex.

    Pixel (i, j) spans corners (j, i)..(j+1, i+1); each side without a set
    neighbor contributes one edge, oriented so the interior is on the right.
    """
    h, w = bits.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = bits
    edges: dict[tuple[int, int], list[tuple[tuple[int, int], int]]] = {}

    def add(start, end, dcode):
        edges.setdefault(start, []).append((end, dcode))

    for i in range(h):
        for j in range(w):
            if not bits[i, j]:
                continue
            if not padded[i, j + 1]:      # no pixel above: top edge, eastward
                add((j, i), (j + 1, i), 0)
            if not padded[i + 1, j + 2]:  # right edge, southward
                add((j + 1, i), (j + 1, i + 1), 1)
            if not padded[i + 2, j + 1]:  # bottom edge, westward
                add((j + 1, i + 1), (j, i + 1), 2)
            if not padded[i + 1, j]:      # left edge, northward
                add((j, i + 1), (j, i), 3)
    return edges


def outer_boundary_polygon(bits: np.ndarray) -> list[tuple[float, float]]:
    """Outer boundary ring of a (single-component) mask, collinear runs merged.

    Starts from the top edge of the first set pixel in row-major order, which
    always lies on the outer ring, and walks with interior on the right;
    vertices where two boundary edges leave (diagonal pinches) take the
    sharpest right turn so the trace never jumps to a hole ring.
    """
    bits = np.asarray(bits, dtype=bool)
    if not bits.any():
        raise ValueError("mask has no set pixels")
    edges = _boundary_edges(bits)
    first = np.argwhere(bits)[0]
    start = (int(first[1]), int(first[0]))  # top-left corner of that pixel

    ring: list[tuple[int, int]] = [start]
    dirs: list[int] = []
    vertex = start
    incoming = None
    while True:
        options = edges[vertex]
        if incoming is None or len(options) == 1:
            nxt, dcode = options[0]
        else:
            by_turn = {dcode: (nxt, dcode) for nxt, dcode in options}
            for cand in ((incoming + 1) % 4, incoming, (incoming + 3) % 4):
                if cand in by_turn:
                    nxt, dcode = by_turn[cand]
                    break
        options.remove((nxt, dcode))
        dirs.append(dcode)
        vertex = nxt
        incoming = dcode
        if vertex == start:
            break
        ring.append(vertex)

    # merge consecutive edges sharing a direction
    poly = [ring[0]]
    for k in range(1, len(ring)):
        if dirs[k] != dirs[k - 1]:
            poly.append(ring[k])
    return [(float(x), float(y)) for x, y in poly]


def mask_to_polygon(bits: np.ndarray) -> list[tuple[float, float]]:
    """Largest component's outer boundary as a polygon ring."""
    return outer_boundary_polygon(largest_component(bits))


def decode_mask(doc: dict) -> np.ndarray:
    """Decode the dump mask encodings.

    Either ``{"bits": [[0, 1, ...], ...]}`` (nested rows) or
    ``{"width": W, "height": H, "counts": [...]}`` with row-major run
    lengths alternating zero-runs and one-runs, starting with zeros.
    """
    if "bits" in doc:
        bits = np.asarray(doc["bits"], dtype=bool)
        if bits.ndim != 2:
            raise ValueError("mask 'bits' must be a 2-D nested list")
        return bits
    if {"width", "height", "counts"} <= doc.keys():
        w, h = int(doc["width"]), int(doc["height"])
        counts = doc["counts"]
        total = sum(counts)
        if total != w * h:
            raise ValueError(f"mask run lengths sum to {total}, expected {w * h}")
        flat = np.zeros(w * h, dtype=bool)
        pos = 0
        value = False
        for run in counts:
            if value:
                flat[pos:pos + run] = True
            pos += run
            value = not value
        return flat.reshape(h, w)
    raise ValueError("mask needs 'bits' or 'width'/'height'/'counts'")
