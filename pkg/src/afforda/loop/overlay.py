"""Deterministic visual-prompt rendering: marked regions and numbered candidates.

Everything here is pure pixel arithmetic (no font files, no PRNG), so a given
input renders to byte-identical output on every platform.
"""

from __future__ import annotations

import numpy as np

from ..core import BinaryMask
from ..errors import EmptyMaskError, OverlappingPartitionsError

FILL_ALPHA = 0.45
OUTLINE_PX = 2

# Fixed 20-color palette (RGB), cycled when there are more candidates.
PALETTE = (
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
)

_DIGITS = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def _erode8(mask: np.ndarray) -> np.ndarray:
    """Pixels whose full 8-neighbourhood (and themselves) are foreground."""
    h, w = mask.shape
    padded = np.pad(mask, 1, constant_values=False)
    out = mask.copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            out &= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return out


def _outline(mask: np.ndarray, thickness: int = OUTLINE_PX) -> np.ndarray:
    inner = mask
    for _ in range(thickness):
        inner = _erode8(inner)
    return mask & ~inner


def label_anchor(mask: BinaryMask) -> tuple[int, int]:
    """Mask centroid, nudged to the nearest interior pixel when outside.

    Ties in the nearest-interior search resolve in row-major order for
    determinism.
    """
    if mask.is_empty():
        raise EmptyMaskError("cannot place a label on an empty mask")
    ys, xs = np.nonzero(mask.pixels)
    cx = float(xs.mean())
    cy = float(ys.mean())
    px, py = int(np.floor(cx + 0.5)), int(np.floor(cy + 0.5))
    if (0 <= px < mask.width and 0 <= py < mask.height
            and mask.pixels[py, px]):
        return px, py
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    best = int(np.argmin(d2))
    return int(xs[best]), int(ys[best])


def _digit_bitmap(label: str, scale: int) -> np.ndarray:
    columns = []
    for i, ch in enumerate(label):
        rows = _DIGITS[ch]
        glyph = np.array([[c == "1" for c in row] for row in rows], dtype=bool)
        if i > 0:
            columns.append(np.zeros((7, 1), dtype=bool))
        columns.append(glyph)
    bitmap = np.hstack(columns)
    if scale > 1:
        bitmap = np.kron(bitmap, np.ones((scale, scale), dtype=bool)).astype(bool)
    return bitmap


def _draw_label(canvas: np.ndarray, anchor: tuple[int, int], label: str) -> None:
    h, w = canvas.shape[:2]
    scale = max(1, min(h, w) // 128)
    bitmap = np.pad(_digit_bitmap(label, scale), 1, constant_values=False)
    bh, bw = bitmap.shape
    y0 = int(np.clip(anchor[1] - bh // 2, 0, h - bh))
    x0 = int(np.clip(anchor[0] - bw // 2, 0, w - bw))
    patch = canvas[y0:y0 + bh, x0:x0 + bw]
    halo = ~_erode8(~bitmap)  # the glyph plus a one-pixel dark rim
    patch[halo] = (0, 0, 0)
    patch[bitmap] = (255, 255, 255)


def _blend(canvas: np.ndarray, mask: np.ndarray, color) -> None:
    region = canvas[mask].astype(np.float64)
    mixed = (1.0 - FILL_ALPHA) * region + FILL_ALPHA * np.asarray(color, dtype=np.float64)
    canvas[mask] = np.floor(mixed + 0.5).astype(np.uint8)


def render_region_overlay(image: np.ndarray, mask: BinaryMask,
                          color=PALETTE[0]) -> np.ndarray:
    """Mark one region: translucent fill, 2 px outline, numeral '1'."""
    if mask.is_empty():
        raise EmptyMaskError("cannot render an empty region")
    if image.shape[:2] != (mask.height, mask.width):
        raise ValueError("mask does not match image dimensions")
    canvas = np.ascontiguousarray(image.copy())
    m = mask.pixels
    _blend(canvas, m, color)
    canvas[_outline(m)] = color
    _draw_label(canvas, label_anchor(mask), "1")
    return canvas


def render_som_overlay(image: np.ndarray,
                       partitions: list[BinaryMask]) -> np.ndarray:
    """Number every candidate region: cycled colors, outlines, labels 1..K."""
    if not partitions:
        raise ValueError("need at least one partition")
    coverage = np.zeros(image.shape[:2], dtype=np.int32)
    for part in partitions:
        if part.pixels.shape != image.shape[:2]:
            raise ValueError("partition does not match image dimensions")
        coverage += part.pixels
    if (coverage > 1).any():
        raise OverlappingPartitionsError("candidate regions overlap")
    canvas = np.ascontiguousarray(image.copy())
    for i, part in enumerate(partitions):
        if part.is_empty():
            continue
        color = PALETTE[i % len(PALETTE)]
        _blend(canvas, part.pixels, color)
        canvas[_outline(part.pixels)] = color
    for i, part in enumerate(partitions):
        if part.is_empty():
            continue
        _draw_label(canvas, label_anchor(part), str(i + 1))
    return canvas
