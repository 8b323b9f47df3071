"""Raster and trajectory interchange codecs.

Masks travel as 8-bit grayscale PNGs or column-major RLE sidecars; heatmaps
as 8-bit grayscale PNGs holding value/255 before normalization; trajectories
as JSON documents of per-pixel [x, y, z] arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import AffordanceMap, BinaryMask, Trajectory3D
from .errors import (
    BadCountsError,
    NonFiniteError,
    RaggedTrajectoryError,
    UnsupportedFormatError,
    ZeroMassError,
)


@dataclass(frozen=True)
class RleMask:
    """Column-major run-length mask: alternating 0-run/1-run lengths.

    The first count is the leading zero-run and may be 0.
    """

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("mask dimensions must be positive")


def encode_rle(mask: BinaryMask) -> RleMask:
    flat = mask.pixels.ravel(order="F").astype(np.int8)
    counts: list[int] = []
    current = 0  # runs alternate starting from zeros
    run = 0
    for value in flat:
        if value == current:
            run += 1
        else:
            counts.append(run)
            current = value
            run = 1
    counts.append(run)
    return RleMask(width=mask.width, height=mask.height, counts=tuple(counts))


def decode_rle(rle: RleMask) -> BinaryMask:
    if any(c < 0 for c in rle.counts):
        raise BadCountsError("negative run length")
    total = sum(rle.counts)
    if total != rle.width * rle.height:
        raise BadCountsError(
            f"counts sum to {total}, expected {rle.width * rle.height}")
    values = np.zeros(total, dtype=bool)
    pos = 0
    bit = False
    for count in rle.counts:
        if bit:
            values[pos:pos + count] = True
        pos += count
        bit = not bit
    return BinaryMask(values.reshape((rle.height, rle.width), order="F"))


def _open_grayscale(path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode != "L":
            raise UnsupportedFormatError(
                f"{path}: expected 8-bit single-channel image, got mode {img.mode!r}")
        return np.asarray(img, dtype=np.uint8)


def load_grayscale_mask(path) -> BinaryMask:
    """Nonzero pixels become foreground."""
    return BinaryMask(_open_grayscale(path) != 0)


def save_mask_png(mask: BinaryMask, path) -> None:
    Image.fromarray(mask.pixels.astype(np.uint8) * 255, mode="L").save(path)


def load_heatmap(path) -> AffordanceMap:
    """Gray values map to value/255; normalization happens on demand."""
    values = _open_grayscale(path).astype(np.float64) / 255.0
    if values.sum() <= 0.0:
        raise ZeroMassError(f"{path}: heatmap is identically zero")
    return AffordanceMap(values, normalized=False)


def save_heatmap_png(amap: AffordanceMap, path) -> None:
    """Quantize to 8 bits, scaling the maximum to 255."""
    peak = float(amap.values.max())
    if peak <= 0.0:
        raise ZeroMassError("cannot save a zero-mass heatmap")
    quantized = np.floor(amap.values / peak * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(quantized, mode="L").save(path)


def load_trajectories(path) -> list[Trajectory3D]:
    """Read a trajectory document: one [x, y, z] per frame per tracked pixel.

    All trajectories must have the same length and 3-component points; any
    NaN/Inf coordinate is rejected with its pixel id and frame index.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    items = doc["trajectories"] if isinstance(doc, dict) else doc
    out: list[Trajectory3D] = []
    expected_len: int | None = None
    for item in items:
        pixel_id = int(item["pixel_id"])
        points = item["points"]
        if expected_len is None:
            expected_len = len(points)
        elif len(points) != expected_len:
            raise RaggedTrajectoryError(
                f"pixel {pixel_id}: {len(points)} frames, expected {expected_len}")
        rows = []
        for frame, point in enumerate(points):
            if not isinstance(point, (list, tuple)) or len(point) != 3:
                raise RaggedTrajectoryError(
                    f"pixel {pixel_id}, frame {frame}: point is not [x, y, z]")
            if not all(isinstance(c, (int, float)) and math.isfinite(c)
                       for c in point):
                raise NonFiniteError(
                    f"pixel {pixel_id}, frame {frame}: non-finite coordinate")
            rows.append([float(c) for c in point])
        out.append(Trajectory3D(pixel_id, np.array(rows)))
    return out


def save_trajectories(trajs: list[Trajectory3D], path) -> None:
    doc = {"trajectories": [
        {"pixel_id": t.pixel_id, "points": t.points.tolist()} for t in trajs]}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")
