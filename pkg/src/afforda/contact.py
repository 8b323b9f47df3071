"""Contact-region annotation: from a clip to a ground-truth affordance map.

The chain samples contact points on the hand boundary inside the object box,
projects them back through per-frame homographies until the first frame with
no detected contact, filters points that left the object segment, and blurs
the survivors into a normalized heatmap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import convolve1d

from . import geometry
from .core import AffordanceMap, BBox, BinaryMask, InteractionClip, nearest_pixel
from .errors import (
    AffordanceError,
    AllPointsLostError,
    EmptyPointsError,
    MisalignedInputsError,
    NoContactError,
)
from .geometry import Homography, PointSet2D


@dataclass(frozen=True)
class AnnotateConfig:
    """Knobs for the end-to-end clip annotator."""

    point_count: int = 32
    sigma: float = 10.0
    seed: int = 0
    inlier_px: float = 3.0
    ransac_iters: int = 1000


@dataclass(frozen=True)
class BackprojectionResult:
    """Provenance of one back-projection walk.

    ``dropped`` counts points removed by the object-segment filter at the stop
    frame; ``out_of_bounds`` counts points lost mid-walk for leaving the image.
    ``valid_points`` is always a subset of ``per_frame_points[stop_index]``.
    """

    stop_index: int
    per_frame_points: dict[int, PointSet2D]
    valid_points: PointSet2D
    dropped: int = 0
    out_of_bounds: int = 0


def mask_boundary(mask: BinaryMask) -> np.ndarray:
    """Boolean raster of 8-connectivity boundary pixels.

    A foreground pixel is boundary when any of its 8 neighbours is background
    or outside the image.
    """
    m = mask.pixels
    h, w = m.shape
    padded = np.pad(m, 1, constant_values=False)
    interior = np.ones_like(m)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            interior &= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return m & ~interior


def sample_contact_points(hand: BinaryMask, object_box: BBox,
                          count: int, seed: int = 0) -> PointSet2D:
    """Sample boundary pixels of the hand mask that lie inside the object box.

    Uniform without replacement; at most ``count`` points; deterministic for a
    fixed seed. Points come back in row-major raster order.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if hand.is_empty():
        raise NoContactError("hand mask is empty")
    boundary = mask_boundary(hand)
    ys, xs = np.nonzero(boundary)
    inside = ((xs >= object_box.x0) & (xs <= object_box.x1)
              & (ys >= object_box.y0) & (ys <= object_box.y1))
    xs, ys = xs[inside], ys[inside]
    if xs.size == 0:
        raise NoContactError("no hand-boundary pixel inside the object box")
    k = min(count, xs.size)
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(xs.size, size=k, replace=False))
    return PointSet2D(np.column_stack([xs[pick], ys[pick]]).astype(np.float64))


def _in_bounds_mask(pts: np.ndarray, width: int, height: int) -> np.ndarray:
    px = np.floor(pts[:, 0] + 0.5)
    py = np.floor(pts[:, 1] + 0.5)
    return (px >= 0) & (px < width) & (py >= 0) & (py < height)


def backproject_contact(points: PointSet2D, clip: InteractionClip,
                        homographies: list[Homography],
                        contact_flags: list[bool]) -> BackprojectionResult:
    """Walk contact points backwards from the contact frame.

    ``homographies[i]`` maps frame i coordinates to frame i-1. The walk stops
    at the most recent frame whose contact flag is false (frame 0 when every
    earlier frame is flagged). Points leaving the image are dropped at the
    frame where they exit.
    """
    n = len(clip.frames)
    if len(homographies) != n or len(contact_flags) != n:
        raise MisalignedInputsError(
            f"homographies/flags must align with {n} frames "
            f"(got {len(homographies)}/{len(contact_flags)})")
    ci = clip.contact_index
    if not contact_flags[ci]:
        raise MisalignedInputsError("contact flag must be set at the contact frame")
    stop = 0
    for i in range(ci - 1, -1, -1):
        if not contact_flags[i]:
            stop = i
            break

    per_frame: dict[int, PointSet2D] = {ci: points}
    current = points.as_array()
    lost = 0
    for i in range(ci, stop, -1):
        projected = geometry.apply(homographies[i], PointSet2D(current)).as_array()
        frame = clip.frames[i - 1]
        keep = _in_bounds_mask(projected, frame.width, frame.height)
        lost += int((~keep).sum())
        current = projected[keep]
        if current.shape[0] == 0:
            raise AllPointsLostError(
                f"all points left the image at frame {i - 1}")
        per_frame[i - 1] = PointSet2D(current)
    return BackprojectionResult(
        stop_index=stop,
        per_frame_points=per_frame,
        valid_points=PointSet2D(current),
        dropped=0,
        out_of_bounds=lost,
    )


def filter_points_by_mask(points: PointSet2D, object_mask: BinaryMask) -> PointSet2D:
    """Keep points whose nearest pixel lies inside the mask, order preserved."""
    kept = [(x, y) for x, y in points if object_mask.contains_point(x, y)]
    return PointSet2D(np.array(kept, dtype=np.float64).reshape(-1, 2))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Truncated 1-D Gaussian with radius ceil(3*sigma), renormalized to sum 1."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def rasterize_affordance_map(points: PointSet2D, width: int, height: int,
                             sigma: float) -> AffordanceMap:
    """Impulses at the points' nearest pixels, Gaussian-blurred, unit mass."""
    if len(points) == 0:
        raise EmptyPointsError("no points to rasterize")
    impulse = np.zeros((height, width), dtype=np.float64)
    placed = 0
    for x, y in points:
        px, py = nearest_pixel(x, y)
        if 0 <= px < width and 0 <= py < height:
            impulse[py, px] += 1.0
            placed += 1
    if placed == 0:
        raise EmptyPointsError("every point falls outside the raster")
    k = gaussian_kernel(sigma)
    blurred = convolve1d(impulse, k, axis=0, mode="constant", cval=0.0)
    blurred = convolve1d(blurred, k, axis=1, mode="constant", cval=0.0)
    return AffordanceMap(blurred, normalized=False).normalized_copy()


def _stage(err: AffordanceError, stage: str) -> AffordanceError:
    if err.stage is None:
        err.stage = stage
    return err


def _frame_exclusions(clip: InteractionClip, i: int) -> list:
    regions = []
    for masks, boxes in ((clip.hand_masks, clip.hand_boxes),
                         (clip.object_masks, clip.object_boxes)):
        mask = masks[i] if masks else None
        box = boxes[i] if boxes else None
        if mask is not None:
            regions.append(mask)
        elif box is not None:
            regions.append(box)
    return regions


def _clip_homographies(clip: InteractionClip, stop: int,
                       config: AnnotateConfig) -> list[Homography]:
    """Precomputed homographies, or RANSAC estimates for the frames we walk."""
    n = len(clip.frames)
    if clip.homographies is not None:
        hs = list(clip.homographies)
        if len(hs) != n:
            raise MisalignedInputsError(
                f"precomputed homographies must align with {n} frames")
        return hs
    if clip.correspondences is None:
        raise MisalignedInputsError(
            "clip carries neither homographies nor correspondences")
    corrs = list(clip.correspondences)
    if len(corrs) != n:
        raise MisalignedInputsError(
            f"correspondence lists must align with {n} frames")
    hs = [Homography.identity() for _ in range(n)]
    for i in range(stop + 1, clip.contact_index + 1):
        if corrs[i] is None:
            raise MisalignedInputsError(f"no correspondences for frame {i}")
        exclusion = _frame_exclusions(clip, i) + _frame_exclusions(clip, i - 1)
        h, _ = geometry.estimate_homography_ransac(
            corrs[i], exclusion=exclusion, inlier_px=config.inlier_px,
            max_iters=config.ransac_iters, seed=config.seed + i)
        hs[i] = h
    return hs


def annotate_contact(clip: InteractionClip,
                     config: AnnotateConfig = AnnotateConfig(),
                     ) -> tuple[AffordanceMap, BackprojectionResult]:
    """End-to-end clip annotation: sample, back-project, filter, rasterize.

    Sub-operation errors propagate with the failing stage recorded on the
    exception. The returned result carries the provenance the review UI shows
    (stop frame, dropped and out-of-bounds counts).
    """
    ci = clip.contact_index
    flags = clip.contact_flags
    if len(flags) != len(clip.frames):
        raise MisalignedInputsError("detections must align with frames")

    hand = clip.hand_masks[ci] if clip.hand_masks else None
    obox = clip.object_boxes[ci] if clip.object_boxes else None
    if hand is None:
        raise _stage(NoContactError("no hand mask at the contact frame"),
                     "sample_contact_points")
    if obox is None:
        raise _stage(NoContactError("no object box at the contact frame"),
                     "sample_contact_points")

    try:
        points = sample_contact_points(hand, obox, config.point_count, config.seed)
    except AffordanceError as e:
        raise _stage(e, "sample_contact_points")

    stop = 0
    for i in range(ci - 1, -1, -1):
        if not flags[i]:
            stop = i
            break

    try:
        homographies = _clip_homographies(clip, stop, config)
    except AffordanceError as e:
        raise _stage(e, "estimate_homography")

    try:
        result = backproject_contact(points, clip, homographies, flags)
    except AffordanceError as e:
        raise _stage(e, "backproject_contact")

    valid = result.valid_points
    object_mask = (clip.object_masks[result.stop_index]
                   if clip.object_masks else None)
    if object_mask is not None:
        filtered = filter_points_by_mask(valid, object_mask)
        result = replace(result,
                         valid_points=filtered,
                         dropped=len(valid) - len(filtered))

    frame = clip.frames[result.stop_index]
    try:
        amap = rasterize_affordance_map(result.valid_points,
                                        frame.width, frame.height, config.sigma)
    except AffordanceError as e:
        raise _stage(e, "rasterize_affordance_map")
    return amap, result
