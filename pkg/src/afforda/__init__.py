"""Egocentric affordance annotation, evaluation, refinement, and review."""

from .core import (
    AffordanceMap,
    BBox,
    BinaryMask,
    DirectionVector,
    DiscreteDirection,
    FrameDetection,
    ImageRef,
    Instruction,
    InteractionClip,
    Sample,
    Trajectory3D,
    parse_narration,
    select_peak_detection,
)

__version__ = "0.1.0"

__all__ = [
    "AffordanceMap",
    "BBox",
    "BinaryMask",
    "DirectionVector",
    "DiscreteDirection",
    "FrameDetection",
    "ImageRef",
    "Instruction",
    "InteractionClip",
    "Sample",
    "Trajectory3D",
    "parse_narration",
    "select_peak_detection",
    "__version__",
]
