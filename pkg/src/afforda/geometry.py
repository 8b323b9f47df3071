"""Planar homography estimation and projection chains.

The estimators realize the standard normalized DLT and a seeded RANSAC over
it. The exclusion-region filter lets callers mask out hand/object pixels so
moving foreground does not contaminate the camera-motion estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BBox, BinaryMask
from .errors import (
    AtInfinityError,
    DegenerateError,
    NoConsensusError,
    SingularError,
    UnderdeterminedError,
)

_W_EPS = 1e-12
_RANSAC_CONFIDENCE = 0.999


@dataclass(frozen=True)
class Correspondence:
    """A matched feature point: src in frame t, dst in frame t-1."""

    src: tuple[float, float]
    dst: tuple[float, float]

    def __post_init__(self):
        for x, y in (self.src, self.dst):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("correspondence coordinates must be finite")


class PointSet2D:
    """An ordered set of (x, y) pixel coordinates."""

    __slots__ = ("points",)

    def __init__(self, points):
        arr = np.asarray(points, dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array")
        if not np.isfinite(arr).all():
            raise ValueError("point coordinates must be finite")
        arr.setflags(write=False)
        self.points = arr

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        for x, y in self.points:
            yield (float(x), float(y))

    def as_array(self) -> np.ndarray:
        return self.points

    def __repr__(self) -> str:
        return f"PointSet2D(n={len(self)})"


class Homography:
    """A 3x3 projective map, canonically normalized.

    The matrix is scaled so the bottom-right entry is 1 when it is nonzero
    (relative to the matrix's Frobenius norm), otherwise to unit Frobenius
    norm, making representations of the same map comparable.
    """

    __slots__ = ("m",)

    def __init__(self, m):
        a = np.asarray(m, dtype=np.float64)
        if a.shape != (3, 3):
            raise ValueError("homography matrix must be 3x3")
        if not np.isfinite(a).all():
            raise ValueError("homography matrix must be finite")
        fro = float(np.linalg.norm(a))
        if fro == 0.0:
            raise SingularError("zero matrix")
        if abs(a[2, 2]) > _W_EPS * fro:
            a = a / a[2, 2]
        else:
            a = a / fro
        det = float(np.linalg.det(a))
        scale = float(np.linalg.norm(a))
        if abs(det) <= _W_EPS * scale ** 3:
            raise SingularError(f"matrix is singular (det={det:.3e})")
        a.setflags(write=False)
        self.m = a

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "Homography":
        return cls(np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]]))

    def approx_equal(self, other: "Homography", tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.m, other.m, rtol=0.0, atol=tol))

    def __repr__(self) -> str:
        return f"Homography({self.m.tolist()})"


def _corr_arrays(corrs: Sequence[Correspondence]) -> tuple[np.ndarray, np.ndarray]:
    src = np.array([c.src for c in corrs], dtype=np.float64).reshape(-1, 2)
    dst = np.array([c.dst for c in corrs], dtype=np.float64).reshape(-1, 2)
    return src, dst


def _hartley_transform(pts: np.ndarray) -> np.ndarray:
    """Similarity normalizer: centroid to origin, mean distance to sqrt(2)."""
    c = pts.mean(axis=0)
    d = float(np.sqrt(((pts - c) ** 2).sum(axis=1)).mean())
    if d < 1e-12:
        raise DegenerateError("coincident points")
    s = math.sqrt(2.0) / d
    return np.array([[s, 0.0, -s * c[0]],
                     [0.0, s, -s * c[1]],
                     [0.0, 0.0, 1.0]])


def _apply_3x3(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    h = np.column_stack([pts, np.ones(len(pts))])
    q = h @ t.T
    return q[:, :2] / q[:, 2:3]


def _dlt_from_arrays(src: np.ndarray, dst: np.ndarray) -> Homography:
    t_src = _hartley_transform(src)
    t_dst = _hartley_transform(dst)
    sn = _apply_3x3(t_src, src)
    dn = _apply_3x3(t_dst, dst)
    n = len(sn)
    a = np.zeros((2 * n, 9))
    x, y = sn[:, 0], sn[:, 1]
    u, v = dn[:, 0], dn[:, 1]
    ones = np.ones(n)
    zeros = np.zeros(n)
    a[0::2] = np.column_stack([x, y, ones, zeros, zeros, zeros, -u * x, -u * y, -u])
    a[1::2] = np.column_stack([zeros, zeros, zeros, x, y, ones, -v * x, -v * y, -v])
    _, s, vt = np.linalg.svd(a)
    # rank < 8 means the solution space is >1-dimensional: degenerate layout
    if len(s) >= 8 and s[7] <= 1e-9 * s[0]:
        raise DegenerateError("correspondence configuration is ill-conditioned")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    return Homography(h)


def estimate_homography_dlt(corrs: Sequence[Correspondence]) -> Homography:
    """Normalized-DLT estimate minimizing algebraic error.

    Hartley normalization is applied to both point sets before solving the
    stacked linear system by SVD.
    """
    if len(corrs) < 4:
        raise UnderdeterminedError(f"need >= 4 correspondences, got {len(corrs)}")
    src, dst = _corr_arrays(corrs)
    return _dlt_from_arrays(src, dst)


def apply(h: Homography, pts: PointSet2D) -> PointSet2D:
    """Project every point through the homography."""
    if len(pts) == 0:
        return PointSet2D(np.empty((0, 2)))
    hom = np.column_stack([pts.as_array(), np.ones(len(pts))])
    q = hom @ h.m.T
    w = q[:, 2]
    bad = np.abs(w) <= _W_EPS
    if bad.any():
        idx = [int(i) for i in np.nonzero(bad)[0]]
        raise AtInfinityError(f"{len(idx)} point(s) map to infinity", indices=idx)
    return PointSet2D(q[:, :2] / w[:, None])


def compose(outer: Homography, inner: Homography) -> Homography:
    """The map applying ``inner`` first, then ``outer``."""
    return Homography(outer.m @ inner.m)


def invert(h: Homography) -> Homography:
    try:
        inv = np.linalg.inv(h.m)
    except np.linalg.LinAlgError as e:
        raise SingularError(str(e)) from e
    return Homography(inv)


def _in_any_region(regions: Sequence, x: float, y: float) -> bool:
    for region in regions:
        if isinstance(region, BBox):
            if region.contains(x, y):
                return True
        elif isinstance(region, BinaryMask):
            if region.contains_point(x, y):
                return True
        else:
            raise TypeError(f"unsupported exclusion region {type(region)!r}")
    return False


def _transfer_errors(h: Homography, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    hom = np.column_stack([src, np.ones(len(src))])
    q = hom @ h.m.T
    w = q[:, 2]
    w = np.where(np.abs(w) <= _W_EPS, np.inf, w)
    proj = q[:, :2] / w[:, None]
    return np.sqrt(((proj - dst) ** 2).sum(axis=1))


def estimate_homography_ransac(
    corrs: Sequence[Correspondence],
    exclusion: Sequence = (),
    inlier_px: float = 3.0,
    max_iters: int = 1000,
    seed: int = 0,
) -> tuple[Homography, np.ndarray]:
    """Seeded RANSAC + DLT refit with hand/object regions masked out.

    Correspondences whose src or dst endpoint lies in any exclusion region
    are removed before sampling. Returns the refit homography and a boolean
    inlier flag per *input* correspondence (excluded ones are False); flagged
    inliers have forward transfer error <= ``inlier_px``. Deterministic for a
    fixed seed.
    """
    kept_idx = [i for i, c in enumerate(corrs)
                if not (_in_any_region(exclusion, *c.src)
                        or _in_any_region(exclusion, *c.dst))]
    if len(kept_idx) < 4:
        raise UnderdeterminedError(
            f"only {len(kept_idx)} correspondences remain after exclusion")
    src, dst = _corr_arrays([corrs[i] for i in kept_idx])
    n = len(kept_idx)
    rng = np.random.default_rng(seed)

    best_count = 0
    best_inliers: np.ndarray | None = None
    needed = max_iters
    it = 0
    while it < min(max_iters, needed):
        it += 1
        pick = rng.choice(n, size=4, replace=False)
        try:
            cand = _dlt_from_arrays(src[pick], dst[pick])
        except (DegenerateError, SingularError):
            continue
        inl = _transfer_errors(cand, src, dst) <= inlier_px
        count = int(inl.sum())
        if count > best_count:
            best_count = count
            best_inliers = inl
            ratio = count / n
            if 0.0 < ratio < 1.0:
                denom = math.log(1.0 - ratio ** 4)
                if denom < 0.0:
                    needed = min(max_iters,
                                 math.ceil(math.log(1.0 - _RANSAC_CONFIDENCE) / denom))
            elif ratio >= 1.0:
                break

    if best_inliers is None or best_count < 4:
        raise NoConsensusError(f"best consensus set has {best_count} inliers")

    refit = _dlt_from_arrays(src[best_inliers], dst[best_inliers])
    final = _transfer_errors(refit, src, dst) <= inlier_px
    flags = np.zeros(len(corrs), dtype=bool)
    flags[np.asarray(kept_idx)[final]] = True
    return refit, flags
