"""Deterministic synthetic fixtures: scripted clips and a 3-sample dataset.

``build_fixture`` writes a small self-contained dataset (images, masks,
correspondences, trajectories, ground truth, replay script, predictions)
used by the test suite, the CLI smoke run, and the review UI. The scripted
clip generator is also importable on its own for end-to-end assertions.

Run ``python -m afforda.fixtures OUT_DIR`` to materialize one.
"""

from __future__ import annotations

import json
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import codecs, contact, motion
from .core import (
    BBox,
    BinaryMask,
    DirectionVector,
    DiscreteDirection,
    FrameDetection,
    ImageRef,
    InteractionClip,
    Trajectory3D,
)
from .geometry import Correspondence
from .logs import canonical_json
from .manifest import (
    ClipRecord,
    Manifest,
    SampleRecord,
    save_correspondences,
    save_manifest,
)

FIXTURE_WIDTH = 96
FIXTURE_HEIGHT = 72


@dataclass
class ScriptedClip:
    """A synthetic translating-camera clip plus its ground truth."""

    clip: InteractionClip
    expected_argmax: tuple[float, float]  # first-touch pixel at the stop frame
    stop_index: int
    trajectories: list[Trajectory3D]
    true_direction: DirectionVector
    frame_arrays: list[np.ndarray]
    object_cols: tuple[int, int]  # inclusive, frame-0 coordinates
    object_rows: tuple[int, int]


def _frame_array(width: int, height: int, object_cols, object_rows,
                 hand_rect=None) -> np.ndarray:
    """Draw a simple scene: gradient background, object rectangle, hand blob."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[..., 0] = np.linspace(40, 90, height, dtype=np.uint8)[:, None]
    img[..., 1] = np.linspace(60, 110, width, dtype=np.uint8)[None, :]
    img[..., 2] = 80
    x0, x1 = object_cols
    y0, y1 = object_rows
    img[y0:y1 + 1, max(x0, 0):x1 + 1] = (180, 140, 60)
    if hand_rect is not None:
        hx0, hy0, hx1, hy1 = hand_rect
        img[hy0:hy1 + 1, hx0:hx1 + 1] = (220, 185, 160)
    return img


def scripted_clip(n_pre: int = 4, camera_dx: float = 1.0,
                  width: int = FIXTURE_WIDTH, height: int = FIXTURE_HEIGHT,
                  flags: list[bool] | None = None,
                  direction_step=(0.05, 0.02, 0.10),
                  with_correspondence_noise: bool = False,
                  origin: tuple[int, int] = (34, 24),
                  seed: int = 7) -> ScriptedClip:
    """Static rectangle object, hand approaching from the right, camera panning.

    The camera translates +camera_dx per frame, so a world point seen at x in
    frame i sat at x + camera_dx in frame i-1 (homography i -> i-1 is that
    translation). The hand's left edge touches the object's right edge at the
    contact frame.
    """
    rng = np.random.default_rng(seed)
    ci = n_pre
    n = n_pre + 1
    # object rectangle in frame-0 coordinates
    ox0, ox1 = origin[0], origin[0] + 24
    oy0, oy1 = origin[1], origin[1] + 24

    frames = []
    arrays = []
    object_masks = []
    object_boxes = []
    hand_masks: list[BinaryMask | None] = []
    hand_boxes: list[BBox | None] = []
    hand_rect_contact = None
    for f in range(n):
        shift = int(round(f * camera_dx))
        cols = (ox0 - shift, ox1 - shift)
        mask = np.zeros((height, width), dtype=bool)
        mask[oy0:oy1 + 1, max(cols[0], 0):cols[1] + 1] = True
        object_masks.append(BinaryMask(mask))
        object_boxes.append(BBox(cols[0], oy0, cols[1], oy1))
        if f == ci:
            hx0 = cols[1]  # left hand column sits on the object's right edge
            hy0 = (oy0 + oy1) // 2 - 1
            hand_rect_contact = (hx0, hy0, hx0 + 8, hy0 + 2)
            hand = np.zeros((height, width), dtype=bool)
            hand[hy0:hy0 + 3, hx0:hx0 + 9] = True
            hand_masks.append(BinaryMask(hand))
            hand_boxes.append(BBox(hx0, hy0, hx0 + 8, hy0 + 2))
            arrays.append(_frame_array(width, height, cols, (oy0, oy1),
                                       hand_rect_contact))
        else:
            hand_masks.append(None)
            hand_boxes.append(None)
            arrays.append(_frame_array(width, height, cols, (oy0, oy1)))
        frames.append(ImageRef(f"frame_{f}.png", width, height))

    if flags is None:
        flags = [False] * n_pre + [True]
    confidences = [0.2 + 0.1 * f for f in range(n)]
    confidences[ci] = 0.95
    detections = tuple(FrameDetection(confidence=c, contact=bool(fl))
                       for c, fl in zip(confidences, flags))

    # background correspondences from the top and bottom margins, exact
    # translations with optional extra outliers
    correspondences: list[list[Correspondence] | None] = [None]
    margin_rows = [4, 8, height - 9, height - 5]
    margin_cols = list(range(6, width - 8, 12))
    for f in range(1, n):
        pairs = [Correspondence(src=(float(x), float(y)),
                                dst=(float(x + camera_dx), float(y)))
                 for y in margin_rows for x in margin_cols]
        if with_correspondence_noise:
            for _ in range(4):
                sx, sy = rng.uniform(2, width - 2), rng.uniform(2, 16)
                pairs.append(Correspondence(
                    src=(float(sx), float(sy)),
                    dst=(float(rng.uniform(2, width - 2)),
                         float(rng.uniform(height - 16, height - 2)))))
        correspondences.append(pairs)

    clip = InteractionClip(
        frames=tuple(frames),
        contact_index=ci,
        pre_contact_count=n_pre,
        hand_masks=tuple(hand_masks),
        object_masks=tuple(object_masks),
        hand_boxes=tuple(hand_boxes),
        object_boxes=tuple(object_boxes),
        detections=detections,
        correspondences=tuple(correspondences),
    )

    stop = 0
    for i in range(ci - 1, -1, -1):
        if not flags[i]:
            stop = i
            break
    hx0, hy0, _, _ = hand_rect_contact
    expected = (hx0 + (ci - stop) * camera_dx, hy0 + 1.0)

    # dense post-contact trajectories (60 steps) along one direction
    step = np.asarray(direction_step, dtype=np.float64)
    trajectories = []
    for k in range(4):
        start = np.array([0.3 * k, 0.15 * k, 1.0 + 0.1 * k])
        steps = step + rng.normal(0.0, 0.004 * np.linalg.norm(step), size=(60, 3))
        points = start + np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
        trajectories.append(Trajectory3D(k, points))
    true_direction = DirectionVector.from_array(step / np.linalg.norm(step))

    return ScriptedClip(
        clip=clip,
        expected_argmax=expected,
        stop_index=stop,
        trajectories=trajectories,
        true_direction=true_direction,
        frame_arrays=arrays,
        object_cols=(ox0, ox1),
        object_rows=(oy0, oy1),
    )


def _sample_image(seed: int, width: int, height: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[..., 0] = np.linspace(30, 120, height, dtype=np.uint8)[:, None]
    img[..., 1] = np.linspace(50, 140, width, dtype=np.uint8)[None, :]
    img[..., 2] = rng.integers(60, 100)
    x0, y0 = rng.integers(8, width // 2), rng.integers(8, height // 2)
    w, h = rng.integers(16, 30), rng.integers(12, 20)
    img[y0:y0 + h, x0:x0 + w] = rng.integers(100, 220, size=3)
    return img


_SAMPLES = (
    ("s1", "open the drawer", "real_world", (30.0, 40.0), (0, 0, 1)),
    ("s2", "pick up the kettle", "laboratory", (60.0, 22.0), (1, 0, 0)),
    ("s3", "close the fridge", "real_world", (48.0, 50.0), (-1, 1, 0)),
)


def build_fixture(out_dir) -> dict[str, Path]:
    """Write the bundled 3-sample / 2-clip fixture dataset into ``out_dir``."""
    out = Path(out_dir)
    for sub in ("images", "maps", "frames", "masks", "corr", "traj",
                "predictions", "annotations"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    records = []
    pred_records = []
    provenance_records = []
    for i, (sid, instruction, source, peak, direction) in enumerate(_SAMPLES):
        image = _sample_image(100 + i, FIXTURE_WIDTH, FIXTURE_HEIGHT)
        Image.fromarray(image).save(out / "images" / f"{sid}.png")
        points = np.array([peak, (peak[0] + 2.0, peak[1]),
                           (peak[0], peak[1] + 2.0)])
        amap = contact.rasterize_affordance_map(
            contact.PointSet2D(points), FIXTURE_WIDTH, FIXTURE_HEIGHT, sigma=5.0)
        codecs.save_heatmap_png(amap, out / "maps" / f"{sid}.png")
        shutil.copyfile(out / "maps" / f"{sid}.png",
                        out / "predictions" / f"{sid}.png")
        records.append(SampleRecord(
            id=sid,
            image_path=f"images/{sid}.png",
            width=FIXTURE_WIDTH,
            height=FIXTURE_HEIGHT,
            instruction=instruction,
            source=source,
            gt_map_path=f"maps/{sid}.png",
            gt_direction=direction,
        ))
        pred_records.append({
            "sample_id": sid,
            "heatmap": f"{sid}.png",
            "direction": motion.direction_label(DiscreteDirection(*direction)),
        })
        provenance_records.append({
            "sample_id": sid,
            "stop_index": 0,
            "dropped": 0,
            "out_of_bounds": 0,
            "valid_points": len(points),
            "heatmap": f"maps/{sid}.png",
        })

    clip_records = []
    clip_specs = (
        ("c1", None, (0.05, 0.02, 0.10), 11),
        ("c2", [False, False, False, True, True], (-0.08, 0.01, 0.03), 23),
    )
    for cid, flags, step, seed in clip_specs:
        scripted = scripted_clip(flags=flags, direction_step=step, seed=seed)
        clip = scripted.clip
        frame_entries = []
        for f, (ref, array) in enumerate(zip(clip.frames, scripted.frame_arrays)):
            rel = f"frames/{cid}_{f}.png"
            Image.fromarray(array).save(out / rel)
            frame_entries.append((rel, ref.width, ref.height))
        hand_paths = []
        object_paths = []
        for f in range(len(clip.frames)):
            if clip.hand_masks[f] is not None:
                rel = f"masks/{cid}_hand_{f}.png"
                codecs.save_mask_png(clip.hand_masks[f], out / rel)
                hand_paths.append(rel)
            else:
                hand_paths.append(None)
            rel = f"masks/{cid}_object_{f}.png"
            codecs.save_mask_png(clip.object_masks[f], out / rel)
            object_paths.append(rel)
        corr_rel = f"corr/{cid}.json"
        save_correspondences(clip.correspondences, out / corr_rel)
        traj_rel = f"traj/{cid}.json"
        codecs.save_trajectories(scripted.trajectories, out / traj_rel)
        clip_records.append(ClipRecord(
            id=cid,
            frames=tuple(frame_entries),
            contact_index=clip.contact_index,
            pre_contact_count=clip.pre_contact_count,
            hand_mask_paths=tuple(hand_paths),
            object_mask_paths=tuple(object_paths),
            hand_boxes=tuple(b.as_tuple() if b else None for b in clip.hand_boxes),
            object_boxes=tuple(b.as_tuple() if b else None
                               for b in clip.object_boxes),
            confidences=tuple(d.confidence for d in clip.detections),
            contact_flags=tuple(d.contact for d in clip.detections),
            correspondences_path=corr_rel,
            trajectories_path=traj_rel,
        ))

    manifest = Manifest(version=1, samples=records, clips=clip_records, root=out)
    manifest_path = out / "manifest.jsonl"
    save_manifest(manifest, manifest_path)

    predictions_path = out / "predictions" / "predictions.jsonl"
    predictions_path.write_text(
        "".join(canonical_json(r) + "\n" for r in pred_records), encoding="utf-8")

    (out / "annotations" / "provenance.jsonl").write_text(
        "".join(canonical_json(r) + "\n" for r in provenance_records),
        encoding="utf-8")

    replay_lines = []
    for sid, _, _, _, direction in _SAMPLES:
        replay_lines.append("(20, 15, 60, 50)")
        replay_lines.append("VERDICT: approve")
        replay_lines.append(motion.direction_label(DiscreteDirection(*direction)))
        replay_lines.append("VERDICT: approve")
    replay_path = out / "replay.txt"
    replay_path.write_text("\n".join(replay_lines) + "\n", encoding="utf-8")

    config_path = out / "predict_config.json"
    config_path.write_text(json.dumps({
        "backend": {"kind": "replay", "path": "replay.txt"},
        "mode": "coordinate",
        "max_iterations": 3,
    }, indent=2), encoding="utf-8")

    return {
        "root": out,
        "manifest": manifest_path,
        "predictions": predictions_path,
        "annotations": out / "annotations",
        "replay": replay_path,
        "predict_config": config_path,
    }


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m afforda.fixtures OUT_DIR", file=sys.stderr)
        return 1
    paths = build_fixture(argv[0])
    print(f"fixture written to {paths['root']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
