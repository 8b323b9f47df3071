"""HTTP review service for accepting/rejecting auto-annotations.

State is the manifest plus an append-only decision log; any request sequence
leaves the service in the state you would get by replaying that log onto the
manifest. Decisions are idempotent per (sample, reviewer) with latest-wins
semantics.
"""

from __future__ import annotations

import io
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Query, Response
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image, ImageDraw

from . import codecs
from .core import DiscreteDirection
from .errors import AffordanceError
from .logs import JsonlWriter, read_jsonl
from .manifest import Manifest, SampleRecord, load_manifest
from .motion import direction_label

VERDICTS = ("accept", "reject", "flag")
FAILURE_MODES = ("wrong_hand", "occluded_hand", "noisy_contact_frame",
                 "homography_drift", "other")
STATUSES = ("pending", "accepted", "rejected", "flagged")

_STATUS_OF_VERDICT = {"accept": "accepted", "reject": "rejected",
                      "flag": "flagged"}


@dataclass(frozen=True)
class ReviewDecision:
    """One reviewer's verdict on one sample."""

    sample_id: str
    verdict: str
    reviewer: str
    failure_mode: str | None = None
    timestamp: float = 0.0

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.failure_mode is not None and self.failure_mode not in FAILURE_MODES:
            raise ValueError(f"unknown failure mode {self.failure_mode!r}")
        if self.failure_mode is not None and self.verdict == "accept":
            raise ValueError("failure_mode requires a non-accept verdict")
        if not self.reviewer:
            raise ValueError("reviewer must be non-empty")

    def to_json(self) -> dict:
        return {"sample_id": self.sample_id, "verdict": self.verdict,
                "failure_mode": self.failure_mode, "reviewer": self.reviewer,
                "timestamp": self.timestamp}


@dataclass
class ReviewServiceConfig:
    manifest_path: str
    decisions_path: str
    annotations_dir: str | None = None
    static_dir: str | None = None


class ReviewState:
    """In-memory view of the manifest plus the replayed decision log."""

    def __init__(self, config: ReviewServiceConfig):
        self.config = config
        self.manifest: Manifest = load_manifest(config.manifest_path)
        self.samples: dict[str, SampleRecord] = {
            s.id: s for s in self.manifest.samples}
        self.order: list[str] = [s.id for s in self.manifest.samples]
        self.effective: dict[str, ReviewDecision] = {}
        self.by_reviewer: dict[tuple[str, str], ReviewDecision] = {}
        self.provenance: dict[str, dict] = {}
        self._lock = threading.Lock()
        decisions_path = Path(config.decisions_path)
        if decisions_path.exists():
            for record in read_jsonl(decisions_path):
                self._apply(ReviewDecision(
                    sample_id=record["sample_id"],
                    verdict=record["verdict"],
                    failure_mode=record.get("failure_mode"),
                    reviewer=record["reviewer"],
                    timestamp=record.get("timestamp", 0.0)))
        self._writer = JsonlWriter(decisions_path)
        if config.annotations_dir:
            prov = Path(config.annotations_dir) / "provenance.jsonl"
            if prov.exists():
                for record in read_jsonl(prov):
                    key = record.get("sample_id") or record.get("clip_id")
                    if key:
                        self.provenance[key] = record

    def _apply(self, decision: ReviewDecision) -> None:
        self.effective[decision.sample_id] = decision
        self.by_reviewer[(decision.sample_id, decision.reviewer)] = decision

    def status_of(self, sample_id: str) -> str:
        decision = self.effective.get(sample_id)
        return _STATUS_OF_VERDICT[decision.verdict] if decision else "pending"

    def submit(self, decision: ReviewDecision) -> ReviewDecision:
        """Append unless it matches the pair's current effective decision."""
        with self._lock:
            key = (decision.sample_id, decision.reviewer)
            current = self.by_reviewer.get(key)
            if (current is not None
                    and current.verdict == decision.verdict
                    and current.failure_mode == decision.failure_mode):
                return current
            self._writer.append(decision.to_json())
            self._apply(decision)
            return decision

    def stats(self) -> dict:
        status_counts = {status: 0 for status in STATUSES}
        for sample_id in self.order:
            status_counts[self.status_of(sample_id)] += 1
        mode_counts = {mode: 0 for mode in FAILURE_MODES}
        for decision in self.effective.values():
            if decision.failure_mode:
                mode_counts[decision.failure_mode] += 1
        return {"status": status_counts, "failure_modes": mode_counts}


_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>annotation review</title></head>
<body><h1>annotation review service</h1>
<p>No UI build found. The JSON API lives under <code>/api/</code>.</p>
</body></html>"""


def _overlay_png(state: ReviewState, record: SampleRecord) -> bytes:
    root = state.manifest.root
    with Image.open(root / record.image_path) as img:
        base = img.convert("RGB")
    amap = codecs.load_heatmap(root / record.gt_map_path)
    values = amap.values / amap.values.max()
    heat = np.zeros((amap.height, amap.width, 4), dtype=np.uint8)
    heat[..., 0] = 255
    heat[..., 1] = (80 * (1.0 - values)).astype(np.uint8)
    heat[..., 3] = (values * 170.0).astype(np.uint8)
    overlay = Image.alpha_composite(
        base.convert("RGBA"),
        Image.fromarray(heat, mode="RGBA").resize(base.size, Image.BILINEAR))
    canvas = overlay.convert("RGB")
    if record.gt_direction is not None:
        direction = DiscreteDirection(*record.gt_direction)
        _draw_direction_arrow(canvas, amap, direction)
    buf = io.BytesIO()
    canvas.save(buf, format="PNG")
    return buf.getvalue()


def _draw_direction_arrow(canvas: Image.Image, amap, direction) -> None:
    """Arrow for the direction's image-plane (x, y) component, if any."""
    dx, dy = float(direction.a0), float(direction.a1)
    norm = (dx * dx + dy * dy) ** 0.5
    draw = ImageDraw.Draw(canvas)
    ax, ay = amap.argmax()
    sx = ax * canvas.width / amap.width
    sy = ay * canvas.height / amap.height
    if norm < 1e-9:
        r = max(3, min(canvas.width, canvas.height) // 40)
        draw.ellipse([sx - r, sy - r, sx + r, sy + r], outline=(0, 90, 255), width=2)
        return
    length = 0.18 * min(canvas.width, canvas.height)
    ex = sx + dx / norm * length
    ey = sy + dy / norm * length
    draw.line([sx, sy, ex, ey], fill=(0, 90, 255), width=3)
    # arrowhead: two short back-strokes
    ux, uy = (ex - sx) / length, (ey - sy) / length
    px, py = -uy, ux
    head = length * 0.25
    draw.line([ex, ey, ex - ux * head + px * head * 0.6,
               ey - uy * head + py * head * 0.6], fill=(0, 90, 255), width=3)
    draw.line([ex, ey, ex - ux * head - px * head * 0.6,
               ey - uy * head - py * head * 0.6], fill=(0, 90, 255), width=3)


def create_app(config: ReviewServiceConfig) -> FastAPI:
    state = ReviewState(config)
    app = FastAPI(title="afforda review service")
    app.state.review = state

    def sample_summary(sample_id: str) -> dict:
        record = state.samples[sample_id]
        annotated = record.gt_map_path is not None
        return {
            "id": sample_id,
            "instruction": record.instruction,
            "status": state.status_of(sample_id),
            "thumbnail_url": (f"/api/samples/{sample_id}/overlay.png"
                              if annotated else f"/api/samples/{sample_id}/image.png"),
        }

    @app.get("/api/samples")
    def list_samples(status: str | None = Query(default=None),
                     failure_mode: str | None = Query(default=None),
                     cursor: str | None = Query(default=None),
                     limit: int = Query(default=50)):
        if status is not None and status not in STATUSES:
            return JSONResponse({"detail": f"bad status {status!r}"}, status_code=400)
        if failure_mode is not None and failure_mode not in FAILURE_MODES:
            return JSONResponse({"detail": f"bad failure_mode {failure_mode!r}"},
                                status_code=400)
        if not (1 <= limit <= 500):
            return JSONResponse({"detail": "limit must be in 1..500"}, status_code=400)
        offset = 0
        if cursor is not None:
            try:
                offset = int(cursor)
            except ValueError:
                return JSONResponse({"detail": f"bad cursor {cursor!r}"},
                                    status_code=400)
            if offset < 0:
                return JSONResponse({"detail": "bad cursor"}, status_code=400)
        ids = state.order
        if status is not None:
            ids = [i for i in ids if state.status_of(i) == status]
        if failure_mode is not None:
            ids = [i for i in ids
                   if (d := state.effective.get(i)) and d.failure_mode == failure_mode]
        page = ids[offset:offset + limit]
        next_cursor = str(offset + limit) if offset + limit < len(ids) else None
        return {"items": [sample_summary(i) for i in page], "cursor": next_cursor}

    @app.get("/api/samples/{sample_id}")
    def sample_detail(sample_id: str):
        record = state.samples.get(sample_id)
        if record is None:
            return JSONResponse({"detail": f"unknown sample {sample_id!r}"},
                                status_code=404)
        decision = state.effective.get(sample_id)
        label = None
        if record.gt_direction is not None:
            label = direction_label(DiscreteDirection(*record.gt_direction))
        return {
            **sample_summary(sample_id),
            "source": record.source,
            "direction_label": label,
            "has_heatmap": record.gt_map_path is not None,
            "image_url": f"/api/samples/{sample_id}/image.png",
            "overlay_url": (f"/api/samples/{sample_id}/overlay.png"
                            if record.gt_map_path else None),
            "decision": decision.to_json() if decision else None,
            "provenance": state.provenance.get(sample_id),
        }

    @app.get("/api/samples/{sample_id}/image.png")
    def sample_image(sample_id: str):
        record = state.samples.get(sample_id)
        if record is None:
            return JSONResponse({"detail": f"unknown sample {sample_id!r}"},
                                status_code=404)
        data = (state.manifest.root / record.image_path).read_bytes()
        return Response(content=data, media_type="image/png")

    @app.get("/api/samples/{sample_id}/overlay.png")
    def sample_overlay(sample_id: str):
        record = state.samples.get(sample_id)
        if record is None:
            return JSONResponse({"detail": f"unknown sample {sample_id!r}"},
                                status_code=404)
        if record.gt_map_path is None:
            return JSONResponse(
                {"detail": f"sample {sample_id!r} has no annotation heatmap"},
                status_code=404)
        try:
            data = _overlay_png(state, record)
        except AffordanceError as e:
            return JSONResponse({"detail": str(e)}, status_code=404)
        return Response(content=data, media_type="image/png")

    @app.post("/api/samples/{sample_id}/decision")
    def post_decision(sample_id: str, payload: dict = Body(...)):
        record = state.samples.get(sample_id)
        if record is None:
            return JSONResponse({"detail": f"unknown sample {sample_id!r}"},
                                status_code=404)
        try:
            decision = ReviewDecision(
                sample_id=sample_id,
                verdict=payload.get("verdict"),
                failure_mode=payload.get("failure_mode"),
                reviewer=payload.get("reviewer") or "",
                timestamp=time.time(),
            )
        except (ValueError, TypeError) as e:
            return JSONResponse({"detail": f"malformed decision: {e}"},
                                status_code=409)
        applied = state.submit(decision)
        return {"sample_id": sample_id, "status": state.status_of(sample_id),
                "decision": applied.to_json()}

    @app.get("/api/stats")
    def stats():
        return state.stats()

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _PLACEHOLDER_PAGE

    return app


def serve(config: ReviewServiceConfig, host: str = "127.0.0.1",
          port: int = 8765) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
