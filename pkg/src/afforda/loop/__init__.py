"""Actor/Verifier affordance refinement against pluggable model backends."""

from .backends import (
    Backends,
    ModelBackend,
    OpenAIChatBackend,
    ReplayModelBackend,
    SegmentationBackend,
    StubSegmentation,
    grid_partition,
)
from .config import LoopConfig, load_templates_from_dir
from .overlay import render_region_overlay, render_som_overlay
from .stages import (
    BestChoice,
    DirectionProposal,
    Feedback,
    IterationTrace,
    Observation,
    RegionProposal,
    load_observation,
    run_actor_initial,
    run_actor_refine,
    run_contact_stage,
    run_direction_stage,
    run_sample,
    run_verifier_best,
    run_verifier_diagnose,
    trace_records,
)

__all__ = [
    "Backends",
    "BestChoice",
    "DirectionProposal",
    "Feedback",
    "IterationTrace",
    "LoopConfig",
    "ModelBackend",
    "Observation",
    "OpenAIChatBackend",
    "RegionProposal",
    "ReplayModelBackend",
    "SegmentationBackend",
    "StubSegmentation",
    "grid_partition",
    "load_observation",
    "load_templates_from_dir",
    "render_region_overlay",
    "render_som_overlay",
    "run_actor_initial",
    "run_actor_refine",
    "run_contact_stage",
    "run_direction_stage",
    "run_sample",
    "run_verifier_best",
    "run_verifier_diagnose",
    "trace_records",
]
