"""Benchmark metric suite: heatmap post-processing, SIM, NSS, AUC-Judd, CS.

Maps are evaluated at the standard 224x224 resolution after bilinear
resampling and renormalization; fixation sets come from binarizing the
ground-truth map at 200/255 of its maximum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .contact import rasterize_affordance_map
from .core import AffordanceMap, BinaryMask, DirectionVector, DiscreteDirection, Sample
from .errors import (
    AllFixationsWarning,
    EmptyFixationsError,
    EmptyLatticeWarning,
    EmptyMaskError,
    NotNormalizedError,
    ShapeMismatchError,
    ZeroMassError,
    ZeroVectorError,
)
from .geometry import PointSet2D

STANDARD_SIZE = (224, 224)  # (width, height)
FIXATION_THRESHOLD = 200.0 / 255.0
_NORM_TOL = 1e-9


class FixationSet:
    """Binary ground-truth pixel locations used by NSS and AUC-Judd."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels).astype(bool)
        if arr.ndim != 2:
            raise ValueError("fixations must be a 2-D raster")
        arr.setflags(write=False)
        self.pixels = arr

    @classmethod
    def from_locations(cls, width: int, height: int,
                       locations) -> "FixationSet":
        arr = np.zeros((height, width), dtype=bool)
        for x, y in locations:
            arr[int(y), int(x)] = True
        return cls(arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def count(self) -> int:
        return int(self.pixels.sum())

    @property
    def locations(self) -> list[tuple[int, int]]:
        ys, xs = np.nonzero(self.pixels)
        return [(int(x), int(y)) for x, y in zip(xs, ys)]


@dataclass
class MetricReport:
    """Per-sample metric values; None where a metric was not computable."""

    sample_id: str
    sim: float | None = None
    nss: float | None = None
    auc_j: float | None = None
    cs: float | None = None

    def defined(self) -> dict[str, float]:
        return {k: v for k, v in (("sim", self.sim), ("nss", self.nss),
                                  ("auc_j", self.auc_j), ("cs", self.cs))
                if v is not None}


def bilinear_resize(values: np.ndarray, out_width: int, out_height: int) -> np.ndarray:
    """Bilinear resampling with the half-pixel-center convention.

    Output pixel i samples the input at (i + 0.5) * in/out - 0.5; edge samples
    clamp to the border pixel. Equal input/output sizes reproduce the input
    exactly.
    """
    in_h, in_w = values.shape
    xs = (np.arange(out_width) + 0.5) * (in_w / out_width) - 0.5
    ys = (np.arange(out_height) + 0.5) * (in_h / out_height) - 0.5
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    wx = xs - x0
    wy = ys - y0
    x0i = np.clip(x0, 0, in_w - 1).astype(int)
    x1i = np.clip(x0 + 1, 0, in_w - 1).astype(int)
    y0i = np.clip(y0, 0, in_h - 1).astype(int)
    y1i = np.clip(y0 + 1, 0, in_h - 1).astype(int)
    top = values[y0i][:, x0i] * (1 - wx) + values[y0i][:, x1i] * wx
    bottom = values[y1i][:, x0i] * (1 - wx) + values[y1i][:, x1i] * wx
    return top * (1 - wy)[:, None] + bottom * wy[:, None]


def postprocess_heatmap(amap: AffordanceMap,
                        size: tuple[int, int] = STANDARD_SIZE) -> AffordanceMap:
    """Resample to the standard resolution and renormalize to unit mass."""
    if amap.total <= 0.0:
        raise ZeroMassError("cannot post-process a zero-mass map")
    width, height = size
    resized = bilinear_resize(amap.values, width, height)
    resized = np.maximum(resized, 0.0)
    total = resized.sum()
    if total <= 0.0:
        raise ZeroMassError("map lost all mass during resampling")
    return AffordanceMap(resized / total, normalized=True)


def mask_to_heatmap(mask: BinaryMask, grid_step: int = 16,
                    sigma: float = 10.0) -> AffordanceMap:
    """Convert a predicted mask to a heatmap via grid sampling + Gaussian blur.

    Lattice points {(i*grid_step, j*grid_step)} inside the mask become
    impulses. When no lattice point hits the mask, falls back to the mask
    centroid and warns.
    """
    if grid_step < 1:
        raise ValueError("grid_step must be >= 1")
    if mask.is_empty():
        raise EmptyMaskError("cannot convert an empty mask")
    ys = np.arange(0, mask.height, grid_step)
    xs = np.arange(0, mask.width, grid_step)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    inside = mask.pixels[gy, gx]
    points = np.column_stack([gx[inside], gy[inside]]).astype(np.float64)
    if points.shape[0] == 0:
        mys, mxs = np.nonzero(mask.pixels)
        points = np.array([[mxs.mean(), mys.mean()]])
        warnings.warn("no lattice point inside the mask; using its centroid",
                      EmptyLatticeWarning, stacklevel=2)
    return rasterize_affordance_map(PointSet2D(points),
                                    mask.width, mask.height, sigma)


def binarize_gt(gt: AffordanceMap,
                threshold_fraction: float = FIXATION_THRESHOLD) -> FixationSet:
    """Fixations are pixels at or above the fraction of the map's maximum."""
    peak = float(gt.values.max())
    if peak <= 0.0:
        raise EmptyFixationsError("ground-truth map is identically zero")
    fixations = gt.values / peak >= threshold_fraction
    if not fixations.any():
        raise EmptyFixationsError("no pixel passes the binarization threshold")
    return FixationSet(fixations)


def _require_normalized(amap: AffordanceMap, name: str) -> None:
    if abs(amap.total - 1.0) > _NORM_TOL:
        raise NotNormalizedError(f"{name} map must sum to 1 (got {amap.total!r})")


def _require_same_shape(a, b) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise ShapeMismatchError(
            f"{a.width}x{a.height} vs {b.width}x{b.height}")


def sim(pred: AffordanceMap, gt: AffordanceMap) -> float:
    """Histogram intersection: the sum of per-pixel minima."""
    _require_same_shape(pred, gt)
    _require_normalized(pred, "pred")
    _require_normalized(gt, "gt")
    return float(np.minimum(pred.values, gt.values).sum())


def nss(pred: AffordanceMap, fix: FixationSet) -> float:
    """Mean z-scored prediction at fixation pixels (population std).

    A constant prediction has no contrast to score; returns 0 by convention.
    """
    _require_same_shape(pred, fix)
    if fix.count == 0:
        raise EmptyFixationsError("fixation set is empty")
    values = pred.values
    std = float(values.std())
    if std < 1e-12:
        return 0.0
    z = (values - values.mean()) / std
    return float(z[fix.pixels].mean())


def auc_judd(pred: AffordanceMap, fix: FixationSet) -> float:
    """ROC area with thresholds at the distinct prediction values on fixations.

    TPR/FPR use the >= convention uniformly; the curve is anchored at (0,0)
    and (1,1) and integrated by trapezoid. With no negative pixels there is
    no curve to sweep; returns 1 and warns.
    """
    _require_same_shape(pred, fix)
    if fix.count == 0:
        raise EmptyFixationsError("fixation set is empty")
    values = pred.values
    pos = values[fix.pixels]
    neg = values[~fix.pixels]
    if neg.size == 0:
        warnings.warn("every pixel is a fixation; AUC-J has no negatives",
                      AllFixationsWarning, stacklevel=2)
        return 1.0
    thresholds = np.unique(pos)
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    # count of elements >= t via a right-edged search on the sorted arrays
    tpr = 1.0 - np.searchsorted(pos_sorted, thresholds, side="left") / pos.size
    fpr = 1.0 - np.searchsorted(neg_sorted, thresholds, side="left") / neg.size
    fpr = np.concatenate([[0.0], fpr, [1.0]])
    tpr = np.concatenate([[0.0], tpr, [1.0]])
    order = np.lexsort((tpr, fpr))
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(tpr[order], fpr[order]))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two directions, clamped to [-1, 1].

    Accepts DirectionVector or DiscreteDirection (via its integer vector).
    """
    va = a.as_array()
    vb = b.as_array()
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na <= 0.0 or nb <= 0.0:
        raise ZeroVectorError("cosine similarity of a zero vector")
    return float(np.clip(va @ vb / (na * nb), -1.0, 1.0))


def evaluate_sample(pred_map: AffordanceMap | None,
                    pred_dir: DirectionVector | DiscreteDirection | None,
                    sample: Sample,
                    size: tuple[int, int] = STANDARD_SIZE) -> MetricReport:
    """All four metrics for one sample, each only where ground truth exists."""
    report = MetricReport(sample_id=sample.id)
    if pred_map is not None and sample.gt_map is not None:
        pred = postprocess_heatmap(pred_map, size)
        gt = postprocess_heatmap(sample.gt_map, size)
        fixations = binarize_gt(gt)
        report.sim = sim(pred, gt)
        report.nss = nss(pred, fixations)
        report.auc_j = auc_judd(pred, fixations)
    if pred_dir is not None and sample.gt_direction is not None:
        report.cs = cosine_similarity(pred_dir, sample.gt_direction)
    return report


def aggregate_reports(reports: list[MetricReport]) -> MetricReport:
    """Arithmetic mean per metric over the samples where it is defined.

    Sums are compensated (math.fsum), so aggregation order cannot change the
    result.
    """
    mean = MetricReport(sample_id="mean")
    for name in ("sim", "nss", "auc_j", "cs"):
        values = [getattr(r, name) for r in reports
                  if getattr(r, name) is not None]
        if values:
            setattr(mean, name, math.fsum(values) / len(values))
    return mean
