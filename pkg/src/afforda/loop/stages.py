"""The two-stage Actor/Verifier search: contact region first, then direction.

Each stage runs the same machine: an initial proposal, up to T
diagnose/refine rounds, and a best-of selection when every diagnosis
rejected. Verifiers see rendered proposals (mark-'1' overlays or the
numbered partition) rather than raw coordinates; direction proposals travel
as text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..core import BBox, BinaryMask, DiscreteDirection, ImageRef, Sample
from ..errors import (
    EmptyMaskError,
    InvalidDirectionLabelError,
    UnparseableReplyError,
)
from ..motion import direction_label
from . import parsing
from .backends import Backends, encode_png
from .config import LoopConfig
from .overlay import render_region_overlay, render_som_overlay

RETRY_NOTE = ("\n\nYour previous reply could not be parsed. "
              "Follow the output format exactly.")


@dataclass
class RegionProposal:
    """A contact-region proposal: a bbox (coordinate) or candidate set (som)."""

    step: int
    payload: BBox | tuple[int, ...]
    rendered_overlay: ImageRef | None = None
    mask: BinaryMask | None = None
    overlay_image: np.ndarray | None = None
    overlay_sha256: str | None = None

    def payload_text(self) -> str:
        if isinstance(self.payload, BBox):
            x0, y0, x1, y1 = self.payload.as_tuple()
            return f"({x0:g}, {y0:g}, {x1:g}, {y1:g})"
        return "regions: " + ", ".join(str(i) for i in self.payload)

    def payload_json(self) -> dict:
        if isinstance(self.payload, BBox):
            return {"bbox": list(self.payload.as_tuple())}
        return {"candidates": list(self.payload)}


@dataclass
class DirectionProposal:
    step: int
    direction: DiscreteDirection

    def payload_text(self) -> str:
        return direction_label(self.direction)

    def payload_json(self) -> dict:
        return {"direction": list(self.direction.as_tuple()),
                "label": direction_label(self.direction)}


@dataclass
class Feedback:
    """Verifier diagnosis: verdict plus the three advisory fields."""

    verdict: str
    suggested_part: str = ""
    appearance_and_position: str = ""
    relative_position: str = ""
    raw: str = ""
    degraded: bool = False


@dataclass(frozen=True)
class BestChoice:
    index: int
    clamped: bool = False


@dataclass
class IterationTrace:
    """Everything one stage run produced, in order."""

    stage: str
    proposals: list = field(default_factory=list)
    feedbacks: list[Feedback] = field(default_factory=list)
    final_index: int = 0
    termination: str = "approved"
    flags: list[str] = field(default_factory=list)


@dataclass
class Observation:
    """Loaded per-sample visual context shared by every call of a run."""

    image: np.ndarray
    ref: ImageRef
    partitions: list[BinaryMask] | None = None
    som_overlay: np.ndarray | None = None
    region_overlay: np.ndarray | None = None


def load_observation(sample: Sample, cfg: LoopConfig,
                     backends: Backends) -> Observation:
    with Image.open(sample.image.path) as img:
        image = np.asarray(img.convert("RGB"))
    obs = Observation(image=image, ref=sample.image)
    if cfg.mode == "som":
        obs.partitions = backends.segmentation.partition(image, cfg.som_candidates)
        obs.som_overlay = render_som_overlay(image, obs.partitions)
    return obs


def _base_images(obs: Observation, cfg: LoopConfig, stage: str) -> list[np.ndarray]:
    if stage == "direction":
        if obs.region_overlay is None:
            raise ValueError("direction stage requires the region overlay")
        return [obs.region_overlay]
    if cfg.mode == "som":
        return [obs.som_overlay]
    return [obs.image]


def _request(backends: Backends, prompt: str, images, parse, error_msg: str,
             error_cls=UnparseableReplyError):
    reply = backends.model.send(prompt, images)
    value = parse(reply)
    if value is None:
        reply = backends.model.send(prompt + RETRY_NOTE, images)
        value = parse(reply)
        if value is None:
            raise error_cls(f"{error_msg}: {reply!r}")
    return value


def _region_parser(cfg: LoopConfig):
    if cfg.mode == "som":
        return lambda text: parsing.parse_candidate_set(text, cfg.som_candidates)
    return parsing.parse_bbox


def run_actor_initial(obs: Observation, instruction: str, cfg: LoopConfig,
                      backends: Backends, stage: str = "contact"):
    """Initial proposal from the Actor (contact bbox/candidates or direction)."""
    if stage == "direction":
        prompt = cfg.template("direction_initial").format(instruction=instruction)
        direction = _request(backends, prompt, _base_images(obs, cfg, stage),
                             parsing.parse_direction_reply,
                             "unparseable direction proposal",
                             InvalidDirectionLabelError)
        return DirectionProposal(step=0, direction=direction)
    name = f"contact_initial_{cfg.mode}"
    prompt = cfg.template(name).format(instruction=instruction,
                                       candidate_count=cfg.som_candidates)
    payload = _request(backends, prompt, _base_images(obs, cfg, stage),
                       _region_parser(cfg), "unparseable region proposal")
    return RegionProposal(step=0, payload=payload)


def run_actor_refine(obs: Observation, instruction: str, prev_proposal,
                     feedback: Feedback, cfg: LoopConfig, backends: Backends,
                     stage: str = "contact"):
    """Refined proposal conditioned on the previous one and its feedback."""
    fields = dict(
        instruction=instruction,
        previous=prev_proposal.payload_text(),
        suggested_part=feedback.suggested_part or "(none given)",
        appearance_and_position=feedback.appearance_and_position or "(none given)",
        relative_position=feedback.relative_position or "(none given)",
        candidate_count=cfg.som_candidates,
    )
    step = prev_proposal.step + 1
    if stage == "direction":
        prompt = cfg.template("direction_refine").format(**fields)
        direction = _request(backends, prompt, _base_images(obs, cfg, stage),
                             parsing.parse_direction_reply,
                             "unparseable refined direction",
                             InvalidDirectionLabelError)
        return DirectionProposal(step=step, direction=direction)
    prompt = cfg.template(f"contact_refine_{cfg.mode}").format(**fields)
    payload = _request(backends, prompt, _base_images(obs, cfg, stage),
                       _region_parser(cfg), "unparseable refined region")
    return RegionProposal(step=step, payload=payload)


def run_verifier_diagnose(obs: Observation, instruction: str, proposal,
                          cfg: LoopConfig, backends: Backends,
                          stage: str = "contact") -> Feedback:
    """Verdict plus advisory feedback; unparseable replies degrade to reject."""
    images = _base_images(obs, cfg, stage)
    if stage == "direction":
        prompt = cfg.template("direction_diagnose").format(
            instruction=instruction, proposal=proposal.payload_text())
    elif cfg.mode == "som":
        prompt = cfg.template("contact_diagnose_som").format(
            instruction=instruction, proposal=proposal.payload_text())
    else:
        prompt = cfg.template("contact_diagnose_coordinate").format(
            instruction=instruction)
        images = images + [proposal.overlay_image]
    reply = backends.model.send(prompt, images)
    verdict, fields, degraded = parsing.parse_verdict(reply)
    return Feedback(verdict=verdict, raw=reply, degraded=degraded, **fields)


def run_verifier_best(obs: Observation, instruction: str, proposals,
                      cfg: LoopConfig, backends: Backends,
                      stage: str = "contact") -> BestChoice:
    """Pick the best proposal; out-of-range picks clamp to the last, flagged.

    A single proposal short-circuits without a backend call.
    """
    if not proposals:
        raise ValueError("need at least one proposal")
    if len(proposals) == 1:
        return BestChoice(index=0)
    images = _base_images(obs, cfg, stage)
    listing = "\n".join(f"{i}: {p.payload_text()}"
                        for i, p in enumerate(proposals))
    if stage == "direction":
        prompt = cfg.template("direction_best").format(
            instruction=instruction, proposal_count=len(proposals),
            proposals=listing)
    elif cfg.mode == "som":
        prompt = cfg.template("contact_best_som").format(
            instruction=instruction, proposal_count=len(proposals),
            proposals=listing)
    else:
        prompt = cfg.template("contact_best_coordinate").format(
            instruction=instruction, proposal_count=len(proposals))
        images = images + [p.overlay_image for p in proposals]
    reply = backends.model.send(prompt, images)
    choice = parsing.parse_choice(reply)
    if choice is None or not (0 <= choice < len(proposals)):
        return BestChoice(index=len(proposals) - 1, clamped=True)
    return BestChoice(index=choice)


def _materialize_region(obs: Observation, proposal: RegionProposal,
                        cfg: LoopConfig, backends: Backends,
                        workdir: Path | None, sample_id: str) -> None:
    """Attach the proposal's mask, and in coordinate mode its mark-'1' overlay."""
    if isinstance(proposal.payload, BBox):
        proposal.mask = backends.segmentation.segment(obs.image, proposal.payload)
        proposal.overlay_image = render_region_overlay(obs.image, proposal.mask)
        proposal.overlay_sha256 = hashlib.sha256(
            encode_png(proposal.overlay_image)).hexdigest()
        if workdir is not None:
            rel = Path("overlays") / sample_id / f"contact_step{proposal.step}.png"
            target = workdir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(encode_png(proposal.overlay_image))
            h, w = proposal.overlay_image.shape[:2]
            proposal.rendered_overlay = ImageRef(str(rel), w, h)
    else:
        union = np.zeros(obs.image.shape[:2], dtype=bool)
        for index in proposal.payload:
            union |= obs.partitions[index - 1].pixels
        proposal.mask = BinaryMask(union)


def _run_machine(obs: Observation, instruction: str, cfg: LoopConfig,
                 backends: Backends, stage: str, materialize) -> IterationTrace:
    trace = IterationTrace(stage=stage)
    proposal = run_actor_initial(obs, instruction, cfg, backends, stage=stage)
    materialize(proposal)
    trace.proposals.append(proposal)
    refinements = 0
    while True:
        feedback = run_verifier_diagnose(obs, instruction, trace.proposals[-1],
                                         cfg, backends, stage=stage)
        trace.feedbacks.append(feedback)
        if feedback.degraded:
            trace.flags.append(f"degraded_feedback@{len(trace.feedbacks) - 1}")
        if feedback.verdict == "approve":
            trace.final_index = len(trace.proposals) - 1
            trace.termination = "approved"
            return trace
        if refinements >= cfg.max_iterations:
            choice = run_verifier_best(obs, instruction, trace.proposals,
                                       cfg, backends, stage=stage)
            if choice.clamped:
                trace.flags.append("clamped_best")
            trace.final_index = choice.index
            trace.termination = "exhausted"
            return trace
        refined = run_actor_refine(obs, instruction, trace.proposals[-1],
                                   feedback, cfg, backends, stage=stage)
        materialize(refined)
        if _same_payload(refined, trace.proposals[-1]):
            trace.flags.append(f"stagnant@{refined.step}")
        trace.proposals.append(refined)
        refinements += 1


def _same_payload(a, b) -> bool:
    if isinstance(a, DirectionProposal):
        return a.direction == b.direction
    return a.payload == b.payload


def run_contact_stage(sample: Sample, cfg: LoopConfig, backends: Backends,
                      workdir: Path | None = None,
                      obs: Observation | None = None,
                      ) -> tuple[BinaryMask, IterationTrace]:
    """Search for the contact region; returns the chosen mask and the trace."""
    if obs is None:
        obs = load_observation(sample, cfg, backends)
    trace = _run_machine(
        obs, sample.instruction.raw, cfg, backends, "contact",
        lambda p: _materialize_region(obs, p, cfg, backends, workdir, sample.id))
    return trace.proposals[trace.final_index].mask, trace


def run_direction_stage(sample: Sample, region_mask: BinaryMask,
                        cfg: LoopConfig, backends: Backends,
                        workdir: Path | None = None,
                        obs: Observation | None = None,
                        ) -> tuple[DiscreteDirection, IterationTrace]:
    """Search for the motion direction, conditioned on the confirmed region."""
    if region_mask.is_empty():
        raise EmptyMaskError("region mask is empty")
    if obs is None:
        obs = load_observation(sample, cfg, backends)
    obs.region_overlay = render_region_overlay(obs.image, region_mask)
    if workdir is not None:
        rel = Path("overlays") / sample.id / "direction_region.png"
        target = workdir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(encode_png(obs.region_overlay))
    trace = _run_machine(obs, sample.instruction.raw, cfg, backends,
                         "direction", lambda p: None)
    return trace.proposals[trace.final_index].direction, trace


def trace_records(sample_id: str, trace: IterationTrace) -> list[dict]:
    """Flatten a trace into deterministic line-log records."""
    records = []
    for proposal in trace.proposals:
        record = {"event": "proposal", "sample_id": sample_id,
                  "stage": trace.stage, "step": proposal.step}
        record.update(proposal.payload_json())
        if isinstance(proposal, RegionProposal):
            if proposal.rendered_overlay is not None:
                record["overlay"] = proposal.rendered_overlay.path
            if proposal.overlay_sha256 is not None:
                record["overlay_sha256"] = proposal.overlay_sha256
        records.append(record)
    for step, feedback in enumerate(trace.feedbacks):
        records.append({
            "event": "feedback", "sample_id": sample_id, "stage": trace.stage,
            "step": step, "verdict": feedback.verdict,
            "suggested_part": feedback.suggested_part,
            "appearance_and_position": feedback.appearance_and_position,
            "relative_position": feedback.relative_position,
            "degraded": feedback.degraded,
        })
    records.append({
        "event": "final", "sample_id": sample_id, "stage": trace.stage,
        "final_index": trace.final_index, "termination": trace.termination,
        "flags": list(trace.flags),
    })
    return records


def run_sample(sample: Sample, cfg: LoopConfig, backends: Backends,
               workdir: Path | None = None,
               ) -> tuple[BinaryMask, DiscreteDirection, list[IterationTrace]]:
    """Both stages in order for one sample."""
    obs = load_observation(sample, cfg, backends)
    mask, contact_trace = run_contact_stage(sample, cfg, backends,
                                            workdir=workdir, obs=obs)
    direction, direction_trace = run_direction_stage(
        sample, mask, cfg, backends, workdir=workdir, obs=obs)
    return mask, direction, [contact_trace, direction_trace]
