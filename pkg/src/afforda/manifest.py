"""Dataset manifests: line-delimited records for samples and clips.

Line 1 is a header record carrying the manifest version; every following
line is one sample or clip record with paths relative to the manifest file.
Serialization is canonical (sorted keys), so save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import codecs
from .core import (
    BBox,
    DiscreteDirection,
    FrameDetection,
    ImageRef,
    InteractionClip,
    Sample,
    parse_narration,
)
from .errors import MissingFileError, ParseError
from .geometry import Correspondence
from .logs import canonical_json

SUPPORTED_VERSIONS = (1,)


@dataclass(frozen=True)
class SampleRecord:
    """Manifest entry for one object-instruction-affordance triplet."""

    id: str
    image_path: str
    width: int
    height: int
    instruction: str
    source: str = "real_world"
    gt_map_path: str | None = None
    gt_direction: tuple[int, int, int] | None = None

    def referenced_paths(self) -> list[str]:
        paths = [self.image_path]
        if self.gt_map_path:
            paths.append(self.gt_map_path)
        return paths

    def to_json(self) -> dict:
        record = {
            "kind": "sample",
            "id": self.id,
            "image": {"path": self.image_path, "width": self.width,
                      "height": self.height},
            "instruction": self.instruction,
            "source": self.source,
        }
        if self.gt_map_path is not None:
            record["gt_map"] = self.gt_map_path
        if self.gt_direction is not None:
            record["gt_direction"] = list(self.gt_direction)
        return record

    @classmethod
    def from_json(cls, obj: dict, line: int) -> "SampleRecord":
        try:
            image = obj["image"]
            direction = obj.get("gt_direction")
            return cls(
                id=obj["id"],
                image_path=image["path"],
                width=int(image["width"]),
                height=int(image["height"]),
                instruction=obj["instruction"],
                source=obj.get("source", "real_world"),
                gt_map_path=obj.get("gt_map"),
                gt_direction=tuple(int(a) for a in direction) if direction else None,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"malformed sample record: {e}", line=line) from e

    def load(self, root: Path) -> Sample:
        gt_map = None
        if self.gt_map_path:
            gt_map = codecs.load_heatmap(root / self.gt_map_path)
        gt_direction = (DiscreteDirection(*self.gt_direction)
                        if self.gt_direction else None)
        return Sample(
            id=self.id,
            image=ImageRef(str(root / self.image_path), self.width, self.height),
            instruction=parse_narration(self.instruction),
            gt_map=gt_map,
            gt_direction=gt_direction,
            source=self.source,
        )


@dataclass(frozen=True)
class ClipRecord:
    """Manifest entry for one interaction clip."""

    id: str
    frames: tuple[tuple[str, int, int], ...]  # (path, width, height)
    contact_index: int
    pre_contact_count: int
    hand_mask_paths: tuple[str | None, ...] = ()
    object_mask_paths: tuple[str | None, ...] = ()
    hand_boxes: tuple[tuple[float, float, float, float] | None, ...] = ()
    object_boxes: tuple[tuple[float, float, float, float] | None, ...] = ()
    confidences: tuple[float | None, ...] = ()
    contact_flags: tuple[bool, ...] = ()
    correspondences_path: str | None = None
    trajectories_path: str | None = None

    def referenced_paths(self) -> list[str]:
        paths = [p for p, _, _ in self.frames]
        paths += [p for p in self.hand_mask_paths if p]
        paths += [p for p in self.object_mask_paths if p]
        if self.correspondences_path:
            paths.append(self.correspondences_path)
        if self.trajectories_path:
            paths.append(self.trajectories_path)
        return paths

    def to_json(self) -> dict:
        record = {
            "kind": "clip",
            "id": self.id,
            "frames": [{"path": p, "width": w, "height": h}
                       for p, w, h in self.frames],
            "contact_index": self.contact_index,
            "pre_contact_count": self.pre_contact_count,
            "hand_masks": list(self.hand_mask_paths),
            "object_masks": list(self.object_mask_paths),
            "hand_boxes": [[float(v) for v in b] if b else None
                           for b in self.hand_boxes],
            "object_boxes": [[float(v) for v in b] if b else None
                             for b in self.object_boxes],
            "confidences": list(self.confidences),
            "contact_flags": list(self.contact_flags),
        }
        if self.correspondences_path is not None:
            record["correspondences"] = self.correspondences_path
        if self.trajectories_path is not None:
            record["trajectories"] = self.trajectories_path
        return record

    @classmethod
    def from_json(cls, obj: dict, line: int) -> "ClipRecord":
        try:
            frames = tuple((f["path"], int(f["width"]), int(f["height"]))
                           for f in obj["frames"])
            boxes = {}
            for key in ("hand_boxes", "object_boxes"):
                boxes[key] = tuple(
                    tuple(float(v) for v in b) if b else None
                    for b in obj.get(key, []))
            return cls(
                id=obj["id"],
                frames=frames,
                contact_index=int(obj["contact_index"]),
                pre_contact_count=int(obj["pre_contact_count"]),
                hand_mask_paths=tuple(obj.get("hand_masks", [])),
                object_mask_paths=tuple(obj.get("object_masks", [])),
                hand_boxes=boxes["hand_boxes"],
                object_boxes=boxes["object_boxes"],
                confidences=tuple(obj.get("confidences", [])),
                contact_flags=tuple(bool(f) for f in obj.get("contact_flags", [])),
                correspondences_path=obj.get("correspondences"),
                trajectories_path=obj.get("trajectories"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"malformed clip record: {e}", line=line) from e

    def load(self, root: Path) -> InteractionClip:
        n = len(self.frames)
        frames = tuple(ImageRef(str(root / p), w, h) for p, w, h in self.frames)

        def load_masks(paths):
            if not paths:
                return (None,) * n
            return tuple(codecs.load_grayscale_mask(root / p) if p else None
                         for p in paths)

        def to_boxes(raw):
            if not raw:
                return (None,) * n
            return tuple(BBox(*b) if b else None for b in raw)

        confidences = self.confidences or (None,) * n
        flags = self.contact_flags or (False,) * n
        detections = tuple(FrameDetection(confidence=c, contact=f)
                           for c, f in zip(confidences, flags))
        correspondences = None
        if self.correspondences_path:
            correspondences = load_correspondences(root / self.correspondences_path)
        return InteractionClip(
            frames=frames,
            contact_index=self.contact_index,
            pre_contact_count=self.pre_contact_count,
            hand_masks=load_masks(self.hand_mask_paths),
            object_masks=load_masks(self.object_mask_paths),
            hand_boxes=to_boxes(self.hand_boxes),
            object_boxes=to_boxes(self.object_boxes),
            detections=detections,
            correspondences=correspondences,
        )


def load_correspondences(path) -> tuple:
    """Per-frame matched points: entry i maps frame i to frame i-1.

    The document holds {"frames": [null | {"src": [[x,y]...], "dst": ...}]}.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    out = []
    for entry in doc["frames"]:
        if entry is None:
            out.append(None)
            continue
        pairs = [Correspondence(src=(float(s[0]), float(s[1])),
                                dst=(float(d[0]), float(d[1])))
                 for s, d in zip(entry["src"], entry["dst"])]
        out.append(pairs)
    return tuple(out)


def save_correspondences(per_frame, path) -> None:
    frames = []
    for entry in per_frame:
        if entry is None:
            frames.append(None)
        else:
            frames.append({
                "src": [[c.src[0], c.src[1]] for c in entry],
                "dst": [[c.dst[0], c.dst[1]] for c in entry],
            })
    Path(path).write_text(json.dumps({"frames": frames}), encoding="utf-8")


@dataclass
class Manifest:
    version: int
    samples: list[SampleRecord] = field(default_factory=list)
    clips: list[ClipRecord] = field(default_factory=list)
    root: Path = Path(".")

    def sample_ids(self) -> list[str]:
        return [s.id for s in self.samples]


def load_manifest(path) -> Manifest:
    """Parse and validate a manifest.

    Checks the version, id uniqueness, and that every referenced file exists
    (all absent paths are reported together).
    """
    path = Path(path)
    root = path.parent
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MissingFileError(f"cannot read manifest: {e}", paths=[str(path)]) from e
    lines = [line for line in raw.split("\n") if line]
    if not lines:
        raise ParseError(f"{path}: empty manifest", line=1)

    records = []
    for number, line in enumerate(lines, start=1):
        try:
            records.append((number, json.loads(line)))
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {number}: {e}", line=number) from e

    header_line, header = records[0]
    if header.get("kind") != "manifest":
        raise ParseError(f"{path}: first record must be the manifest header",
                         line=header_line)
    version = header.get("version")
    if version not in SUPPORTED_VERSIONS:
        raise ParseError(f"{path}: unsupported version {version!r}",
                         line=header_line, field="version")

    manifest = Manifest(version=version, root=root)
    seen_samples: set[str] = set()
    seen_clips: set[str] = set()
    for number, obj in records[1:]:
        kind = obj.get("kind")
        if kind == "sample":
            record = SampleRecord.from_json(obj, number)
            if record.id in seen_samples:
                raise ParseError(f"{path}: duplicate sample id {record.id!r}",
                                 line=number, field="id")
            seen_samples.add(record.id)
            manifest.samples.append(record)
        elif kind == "clip":
            record = ClipRecord.from_json(obj, number)
            if record.id in seen_clips:
                raise ParseError(f"{path}: duplicate clip id {record.id!r}",
                                 line=number, field="id")
            seen_clips.add(record.id)
            manifest.clips.append(record)
        else:
            raise ParseError(f"{path}: unknown record kind {kind!r}", line=number)

    missing = []
    for record in (*manifest.samples, *manifest.clips):
        for rel in record.referenced_paths():
            if not (root / rel).exists():
                missing.append(str(root / rel))
    if missing:
        raise MissingFileError(
            f"{len(missing)} referenced file(s) missing", paths=missing)
    return manifest


def save_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    lines = [canonical_json({"kind": "manifest", "version": manifest.version})]
    lines += [canonical_json(s.to_json()) for s in manifest.samples]
    lines += [canonical_json(c.to_json()) for c in manifest.clips]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
