"""Core domain types plus narration parsing and detection-peak selection.

All types are immutable value objects after construction and safe to share
between threads. Raster types (masks, maps) wrap numpy arrays in row-major
``(height, width)`` layout; point coordinates are always ``(x, y)`` pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptySideError,
    MissingArticleError,
    NoDetectionsError,
    ZeroMassError,
    ZeroVectorError,
)

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class ImageRef:
    """File locator plus pixel dimensions for an image on disk."""

    path: str
    width: int
    height: int

    def __post_init__(self):
        if not self.path:
            raise ValueError("image path must be non-empty")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got "
                             f"{self.width}x{self.height}")


@dataclass(frozen=True)
class Instruction:
    """A manipulation instruction split into verb and noun."""

    verb: str
    noun: str
    raw: str

    def __post_init__(self):
        if not self.verb or not self.noun:
            raise ValueError("verb and noun must be non-empty")

    def render(self) -> str:
        """Canonical 'verb the noun' rendering."""
        return f"{self.verb} the {self.noun}"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, corners (x0, y0) and (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box ({self.x0}, {self.y0}, "
                             f"{self.x1}, {self.y1})")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def within_image(self, width: int, height: int) -> bool:
        return (self.x0 >= 0 and self.y0 >= 0
                and self.x1 <= width and self.y1 <= height)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


def nearest_pixel(x: float, y: float) -> tuple[int, int]:
    """Nearest integer pixel with round-half-up semantics on both axes."""
    return int(np.floor(x + 0.5)), int(np.floor(y + 0.5))


class BinaryMask:
    """Row-major boolean raster; dimensions equal the bound image's."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2:
            raise ValueError("mask must be a 2-D raster")
        arr = arr.astype(bool)
        arr.setflags(write=False)
        self.pixels = arr

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def popcount(self) -> int:
        return int(self.pixels.sum())

    def is_empty(self) -> bool:
        return not self.pixels.any()

    def contains_point(self, x: float, y: float) -> bool:
        """True when the nearest pixel to (x, y) is foreground."""
        px, py = nearest_pixel(x, y)
        if 0 <= px < self.width and 0 <= py < self.height:
            return bool(self.pixels[py, px])
        return False

    def __eq__(self, other) -> bool:
        return (isinstance(other, BinaryMask)
                and self.pixels.shape == other.pixels.shape
                and bool(np.array_equal(self.pixels, other.pixels)))

    def __hash__(self):
        raise TypeError("BinaryMask is not hashable")

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, popcount={self.popcount})"


class AffordanceMap:
    """Non-negative heatmap over image pixels.

    When ``normalized`` is set the values sum to one within 1e-9; the
    normalized variant is the interchange form every metric expects.
    """

    __slots__ = ("values", "normalized")

    def __init__(self, values, normalized: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("affordance map must be a 2-D raster")
        if not np.isfinite(arr).all():
            raise ValueError("affordance map values must be finite")
        if arr.min(initial=0.0) < 0.0:
            raise ValueError("affordance map values must be non-negative")
        if normalized and abs(float(arr.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"normalized map must sum to 1, got {arr.sum()!r}")
        arr.setflags(write=False)
        self.values = arr
        self.normalized = bool(normalized)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def normalized_copy(self) -> "AffordanceMap":
        """Rescale to unit mass; raises ZeroMassError on an all-zero map."""
        s = self.total
        if s <= 0.0:
            raise ZeroMassError("cannot normalize a zero-mass map")
        return AffordanceMap(self.values / s, normalized=True)

    def argmax(self) -> tuple[int, int]:
        """Pixel (x, y) of the maximum value; earliest in row-major order."""
        idx = int(np.argmax(self.values))
        return idx % self.width, idx // self.width

    def __repr__(self) -> str:
        return (f"AffordanceMap({self.width}x{self.height}, "
                f"normalized={self.normalized})")


@dataclass(frozen=True)
class DirectionVector:
    """3-D direction in the camera frame (x right, y down, z forward)."""

    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.hypot(np.hypot(self.x, self.y), self.z))

    def unit(self) -> "DirectionVector":
        n = self.norm()
        if n <= 0.0:
            raise ZeroVectorError("cannot normalize the zero vector")
        return DirectionVector(self.x / n, self.y / n, self.z / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "DirectionVector":
        a = np.asarray(arr, dtype=np.float64).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True, order=True)
class DiscreteDirection:
    """One of the 26 discrete directions with components in {-1, 0, +1}."""

    a0: int
    a1: int
    a2: int

    def __post_init__(self):
        for a in (self.a0, self.a1, self.a2):
            if a not in (-1, 0, 1):
                raise ValueError(f"components must be in {{-1, 0, 1}}, got {a}")
        if self.a0 == self.a1 == self.a2 == 0:
            raise ValueError("the zero direction is not in the codebook")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.a0, self.a1, self.a2)

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2], dtype=np.float64)

    @classmethod
    def enumerate(cls) -> list["DiscreteDirection"]:
        """All 26 values in lexicographic (a0, a1, a2) order."""
        out = []
        for a0 in (-1, 0, 1):
            for a1 in (-1, 0, 1):
                for a2 in (-1, 0, 1):
                    if a0 == a1 == a2 == 0:
                        continue
                    out.append(cls(a0, a1, a2))
        return out


class Trajectory3D:
    """Ordered camera-space positions of one tracked pixel, one per frame."""

    __slots__ = ("pixel_id", "points")

    def __init__(self, pixel_id: int, points):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("trajectory points must be an (n, 3) array")
        if arr.shape[0] < 1:
            raise ValueError("trajectory must contain at least one point")
        if not np.isfinite(arr).all():
            raise ValueError("trajectory coordinates must be finite")
        arr.setflags(write=False)
        self.pixel_id = int(pixel_id)
        self.points = arr

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"Trajectory3D(pixel_id={self.pixel_id}, n={len(self)})"


SAMPLE_SOURCES = ("real_world", "laboratory")


@dataclass(frozen=True)
class Sample:
    """One object-instruction-affordance triplet."""

    id: str
    image: ImageRef
    instruction: Instruction
    gt_map: AffordanceMap | None = None
    gt_direction: DiscreteDirection | None = None
    source: str = "real_world"

    def __post_init__(self):
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if self.source not in SAMPLE_SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.gt_map is not None and (
                self.gt_map.width != self.image.width
                or self.gt_map.height != self.image.height):
            raise ValueError("gt_map dimensions must match the image")


@dataclass(frozen=True)
class FrameDetection:
    """Hand-object detector output summary for one frame."""

    confidence: float | None = None
    contact: bool = False


@dataclass(frozen=True)
class InteractionClip:
    """A hand-object interaction clip: pre-contact frames plus the contact frame.

    ``contact_index`` equals ``pre_contact_count`` because exactly the N
    pre-contact frames precede the contact frame. Per-frame masks, boxes and
    detections are optional; homographies (frame i -> frame i-1) may be given
    precomputed or derived from per-frame correspondences.
    """

    frames: tuple[ImageRef, ...]
    contact_index: int
    pre_contact_count: int
    hand_masks: tuple[BinaryMask | None, ...] = ()
    object_masks: tuple[BinaryMask | None, ...] = ()
    hand_boxes: tuple[BBox | None, ...] = ()
    object_boxes: tuple[BBox | None, ...] = ()
    detections: tuple[FrameDetection, ...] = ()
    homographies: tuple | None = None
    correspondences: tuple | None = None

    def __post_init__(self):
        n = len(self.frames)
        if n < 1:
            raise ValueError("clip must contain at least one frame")
        if not (0 <= self.contact_index < n):
            raise ValueError("contact_index out of range")
        if self.contact_index != self.pre_contact_count:
            raise ValueError("pre-contact frames must precede the contact frame "
                             "(contact_index != pre_contact_count)")
        for name in ("hand_masks", "object_masks", "hand_boxes",
                     "object_boxes", "detections"):
            seq = getattr(self, name)
            if seq and len(seq) != n:
                raise ValueError(f"{name} must align with frames "
                                 f"({len(seq)} != {n})")
        for i, (frame, mask) in enumerate(zip(self.frames, self.hand_masks)):
            if mask is not None and (mask.width, mask.height) != (frame.width, frame.height):
                raise ValueError(f"hand mask {i} does not match frame dimensions")
        for i, (frame, mask) in enumerate(zip(self.frames, self.object_masks)):
            if mask is not None and (mask.width, mask.height) != (frame.width, frame.height):
                raise ValueError(f"object mask {i} does not match frame dimensions")

    @property
    def confidences(self) -> list[float | None]:
        return [d.confidence for d in self.detections]

    @property
    def contact_flags(self) -> list[bool]:
        return [d.contact for d in self.detections]


ARTICLE = "the"


def parse_narration(raw: str) -> Instruction:
    """Split a '<verb> the <noun>' narration at the last 'the' token.

    Both sides are lowercased; multiword verbs and nouns keep their internal
    spacing collapsed to single spaces.
    """
    tokens = raw.split()
    article_positions = [i for i, t in enumerate(tokens) if t.lower() == ARTICLE]
    if not article_positions:
        raise MissingArticleError(f"no article token {ARTICLE!r} in {raw!r}")
    split = article_positions[-1]
    verb = " ".join(tokens[:split]).lower()
    noun = " ".join(tokens[split + 1:]).lower()
    if not verb:
        raise EmptySideError(f"empty verb side in {raw!r}")
    if not noun:
        raise EmptySideError(f"empty noun side in {raw!r}")
    return Instruction(verb=verb, noun=noun, raw=raw)


def select_peak_detection(clip: InteractionClip) -> int:
    """Index of the frame with the highest detection confidence.

    Ties resolve to the earliest frame for determinism.
    """
    best_idx = None
    best_conf = -np.inf
    for i, det in enumerate(clip.detections):
        if det.confidence is None:
            continue
        if det.confidence > best_conf:
            best_conf = det.confidence
            best_idx = i
    if best_idx is None:
        raise NoDetectionsError("no frame carries a detection confidence")
    return best_idx
