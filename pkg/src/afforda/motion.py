"""Post-contact 3-D motion direction extraction and discretization.

A tracked trajectory is denoised with DBSCAN, truncated, and reduced to its
principal covariance eigenvector (sign-fixed along net displacement). Per-pixel
directions are averaged and matched against the 26-vector codebook by cosine
similarity.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import DirectionVector, DiscreteDirection, Trajectory3D
from .errors import (
    AmbiguousSpectrumWarning,
    CancelledOutError,
    DegenerateTrajectoryError,
    EmptyAfterCleaningError,
    InvalidDirectionLabelError,
    NoUsableTrajectoriesError,
    ZeroVectorError,
)

NOISE = -1

# Words rendered for each codebook axis, +1 first. The basis mapping codebook
# axes onto camera axes is deliberately configurable (see DirectionCodebook);
# identity keeps vector components and codebook components aligned.
_AXIS_WORDS = (("forward", "backward"), ("downward", "upward"),
               ("leftward", "rightward"))

IDENTITY_BASIS = np.eye(3)
# Alternative mapping: codebook axis0 -> camera +z, axis1 -> +y, axis2 -> -x.
CAMERA_FORWARD_DOWN_LEFT_BASIS = np.array(
    [[0.0, 0.0, -1.0],
     [0.0, 1.0, 0.0],
     [1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class DbscanConfig:
    eps: float
    min_pts: int

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


class DirectionCodebook:
    """The 26 discrete directions paired with their unit vectors.

    ``basis`` columns give the camera-frame image of each codebook axis;
    matching happens against ``basis @ (a0, a1, a2)`` normalized.
    """

    __slots__ = ("basis", "entries")

    def __init__(self, basis: np.ndarray | None = None):
        b = np.asarray(basis if basis is not None else IDENTITY_BASIS,
                       dtype=np.float64)
        if b.shape != (3, 3) or abs(np.linalg.det(b)) < 1e-12:
            raise ValueError("basis must be an invertible 3x3 matrix")
        entries = []
        for d in DiscreteDirection.enumerate():
            v = b @ d.as_array()
            entries.append((d, v / np.linalg.norm(v)))
        self.basis = b
        self.entries = tuple(entries)

    def unit_vector(self, d: DiscreteDirection) -> np.ndarray:
        for entry, vec in self.entries:
            if entry == d:
                return vec
        raise KeyError(d)


DEFAULT_CODEBOOK = DirectionCodebook()


def dbscan(points, cfg: DbscanConfig) -> np.ndarray:
    """Density-based clustering with deterministic scan-order labelling.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps`` (inclusive, Euclidean). Returns one label per point:
    cluster ids 0, 1, ... in discovery order, or -1 for noise.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if n == 0:
        return np.empty(0, dtype=int)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
    adj = d2 <= cfg.eps ** 2
    core = adj.sum(axis=1) >= cfg.min_pts

    UNVISITED = -2
    labels = np.full(n, UNVISITED, dtype=int)
    cluster = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = deque(np.nonzero(adj[i])[0].tolist())
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster  # border point claimed by this cluster
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster
            if core[j]:
                queue.extend(np.nonzero(adj[j])[0].tolist())
        cluster += 1
    return labels


def default_dbscan_config(traj: Trajectory3D, min_pts: int = 3) -> DbscanConfig:
    """Scale-adaptive default: eps = 5% of the trajectory's bounding diagonal."""
    extent = traj.points.max(axis=0) - traj.points.min(axis=0)
    diagonal = float(np.linalg.norm(extent))
    eps = 0.05 * diagonal if diagonal > 0.0 else 1e-9
    return DbscanConfig(eps=eps, min_pts=min_pts)


def clean_trajectory(traj: Trajectory3D, cfg: DbscanConfig,
                     max_len: int = 10) -> Trajectory3D:
    """Drop DBSCAN noise points, keep temporal order, truncate to ``max_len``."""
    labels = dbscan(traj.points, cfg)
    keep = labels != NOISE
    if not keep.any():
        raise EmptyAfterCleaningError(
            f"trajectory {traj.pixel_id} is all noise under eps={cfg.eps}")
    kept = traj.points[keep][:max_len]
    return Trajectory3D(traj.pixel_id, kept)


def principal_direction(traj: Trajectory3D) -> DirectionVector:
    """Top covariance eigenvector, sign-oriented along net displacement.

    Uses the population (1/n) covariance convention. Warns with
    AmbiguousSpectrumWarning when the top two eigenvalues are within 1e-9
    relative of each other.
    """
    pts = traj.points
    centered = pts - pts.mean(axis=0)
    if np.abs(centered).max(initial=0.0) <= 1e-12:
        raise DegenerateTrajectoryError(
            f"trajectory {traj.pixel_id} has no spatial extent")
    cov = centered.T @ centered / len(pts)
    eigvals, eigvecs = np.linalg.eigh(cov)
    top = eigvecs[:, -1]
    if eigvals[-1] > 0.0 and (eigvals[-1] - eigvals[-2]) < 1e-9 * eigvals[-1]:
        warnings.warn(
            f"trajectory {traj.pixel_id}: top two eigenvalues nearly equal",
            AmbiguousSpectrumWarning, stacklevel=2)
    displacement = pts[-1] - pts[0]
    if float(top @ displacement) < 0.0:
        top = -top
    top = top / np.linalg.norm(top)
    return DirectionVector.from_array(top)


def aggregate_direction(dirs: list[DirectionVector]) -> DirectionVector:
    """Arithmetic mean of unit directions, renormalized."""
    if not dirs:
        raise ValueError("need at least one direction")
    mean = np.mean([d.unit().as_array() for d in dirs], axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-9:
        raise CancelledOutError("directions cancel out")
    return DirectionVector.from_array(mean / norm)


def discretize_direction(v: DirectionVector,
                         cb: DirectionCodebook = DEFAULT_CODEBOOK,
                         ) -> DiscreteDirection:
    """Closest codebook entry by cosine similarity.

    Ties break to the lexicographically smallest (a0, a1, a2); the codebook
    enumerates in that order so the first strict maximum wins.
    """
    arr = v.as_array()
    norm = float(np.linalg.norm(arr))
    if norm <= 0.0:
        raise ZeroVectorError("cannot discretize the zero vector")
    unit = arr / norm
    best = None
    best_cos = -np.inf
    for d, e in cb.entries:
        c = float(unit @ e)
        if c > best_cos:
            best_cos = c
            best = d
    return best


@dataclass(frozen=True)
class MotionEstimate:
    """Aggregated motion direction plus bookkeeping about dropped trajectories."""

    direction: DirectionVector
    discrete: DiscreteDirection
    used: int
    dropped: int


def extract_motion_direction(trajs: list[Trajectory3D],
                             cfg: DbscanConfig | None = None,
                             max_len: int = 10,
                             cb: DirectionCodebook = DEFAULT_CODEBOOK,
                             ) -> MotionEstimate:
    """Clean each trajectory, average the principal directions, discretize.

    Trajectories that clean to nothing or are spatially degenerate are
    dropped (and counted); when every trajectory drops the extraction fails.
    When ``cfg`` is None each trajectory gets the scale-adaptive default.
    """
    if not trajs:
        raise NoUsableTrajectoriesError("no trajectories given")
    directions = []
    dropped = 0
    for traj in trajs:
        local_cfg = cfg if cfg is not None else default_dbscan_config(traj)
        try:
            cleaned = clean_trajectory(traj, local_cfg, max_len=max_len)
            directions.append(principal_direction(cleaned))
        except (EmptyAfterCleaningError, DegenerateTrajectoryError):
            dropped += 1
    if not directions:
        raise NoUsableTrajectoriesError(
            f"all {len(trajs)} trajectories were dropped")
    mean = aggregate_direction(directions)
    return MotionEstimate(direction=mean,
                          discrete=discretize_direction(mean, cb),
                          used=len(directions),
                          dropped=dropped)


def direction_label(d: DiscreteDirection) -> str:
    """Bracketed word rendering, e.g. '[backward, upward, leftward]'."""
    words = []
    for value, (positive, negative) in zip(d.as_tuple(), _AXIS_WORDS):
        if value == 1:
            words.append(positive)
        elif value == -1:
            words.append(negative)
    return "[" + ", ".join(words) + "]"


_WORD_TO_AXIS = {}
for _axis, (_pos, _neg) in enumerate(_AXIS_WORDS):
    _WORD_TO_AXIS[_pos] = (_axis, 1)
    _WORD_TO_AXIS[_neg] = (_axis, -1)


def parse_direction_label(text: str) -> DiscreteDirection:
    """Strict inverse of direction_label (case-insensitive, spacing-tolerant)."""
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise InvalidDirectionLabelError(f"not a bracketed label: {text!r}")
    words = [w.strip().lower() for w in s[1:-1].split(",")]
    if words == [""]:
        raise InvalidDirectionLabelError("empty label")
    axes = [0, 0, 0]
    last_axis = -1
    for word in words:
        if word not in _WORD_TO_AXIS:
            raise InvalidDirectionLabelError(f"unknown direction word {word!r}")
        axis, sign = _WORD_TO_AXIS[word]
        if axis <= last_axis:
            raise InvalidDirectionLabelError(
                f"words out of canonical axis order in {text!r}")
        axes[axis] = sign
        last_axis = axis
    return DiscreteDirection(*axes)
