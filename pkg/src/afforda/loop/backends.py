"""Model and segmentation backends for the Actor/Verifier loop.

The model contract is one call: send(text, images) -> reply text. The HTTP
implementation speaks the OpenAI-compatible chat-completions protocol with
base64-embedded PNG images at temperature 0; the replay stub feeds scripted
replies line by line for deterministic tests. Segmentation arrives through
the same kind of narrow interface with deterministic geometric stubs.
"""

from __future__ import annotations

import base64
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests
from PIL import Image

from ..core import BBox, BinaryMask
from ..errors import BackendError, BadKError

TOKEN_ENV_VAR = "AFFORDA_API_TOKEN"


class ModelBackend(Protocol):
    def send(self, text: str, images: Sequence[np.ndarray]) -> str: ...


class SegmentationBackend(Protocol):
    def segment(self, image: np.ndarray, bbox: BBox) -> BinaryMask: ...

    def partition(self, image: np.ndarray, k: int) -> list[BinaryMask]: ...


@dataclass(frozen=True)
class Backends:
    model: ModelBackend
    segmentation: SegmentationBackend


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


def _data_url(image: np.ndarray) -> str:
    return "data:image/png;base64," + base64.b64encode(encode_png(image)).decode("ascii")


class OpenAIChatBackend:
    """Chat-completions client: bearer token from AFFORDA_API_TOKEN."""

    def __init__(self, url: str, model: str, timeout: float = 120.0):
        url = url.rstrip("/")
        if not url.endswith("/chat/completions"):
            url = url + "/chat/completions"
        self.url = url
        self.model = model
        self.timeout = timeout

    def send(self, text: str, images: Sequence[np.ndarray]) -> str:
        content: list[dict] = [{"type": "text", "text": text}]
        for image in images:
            content.append({"type": "image_url",
                            "image_url": {"url": _data_url(image)}})
        payload = {
            "model": self.model,
            "temperature": 0.0,
            "messages": [{"role": "user", "content": content}],
        }
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = requests.post(self.url, json=payload, headers=headers,
                                     timeout=self.timeout)
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError,
                TypeError, ValueError) as e:
            raise BackendError(f"chat backend failed: {e}") from e


class ReplayModelBackend:
    """Replays scripted replies, one per line, consumed in order.

    Literal ``\\n`` sequences in a line expand to newlines so scripted replies
    can span multiple lines. Every call is recorded for assertions.
    """

    def __init__(self, replies: Sequence[str]):
        self._replies = [r.replace("\\n", "\n") for r in replies]
        self._cursor = 0
        self.calls: list[tuple[str, int]] = []

    @classmethod
    def from_file(cls, path) -> "ReplayModelBackend":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(lines)

    @property
    def consumed(self) -> int:
        return self._cursor

    def send(self, text: str, images: Sequence[np.ndarray]) -> str:
        self.calls.append((text, len(images)))
        if self._cursor >= len(self._replies):
            raise BackendError(
                f"replay script exhausted after {self._cursor} replies")
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply


def grid_partition(width: int, height: int, k: int) -> list[BinaryMask]:
    """Tile the image into k disjoint rectangles covering every pixel.

    Picks the factorization r*c = k whose aspect best matches the image; the
    request fails when no factorization yields non-empty tiles.
    """
    if k < 1:
        raise BadKError(f"k must be >= 1, got {k}")
    best = None
    target = height / width
    for r in range(1, k + 1):
        if k % r != 0:
            continue
        c = k // r
        if r > height or c > width:
            continue
        score = (abs(r / c - target), abs(r - c), r)
        if best is None or score < best[0]:
            best = (score, r, c)
    if best is None:
        raise BadKError(f"cannot tile {width}x{height} into {k} non-empty tiles")
    _, rows, cols = best
    tiles = []
    for i in range(rows):
        y0, y1 = i * height // rows, (i + 1) * height // rows
        for j in range(cols):
            x0, x1 = j * width // cols, (j + 1) * width // cols
            pixels = np.zeros((height, width), dtype=bool)
            pixels[y0:y1, x0:x1] = True
            tiles.append(BinaryMask(pixels))
    return tiles


class StubSegmentation:
    """Deterministic stand-in for a promptable segmenter.

    ``segment`` fills the (clipped) bounding box; ``partition`` tiles the
    image on a grid.
    """

    def segment(self, image: np.ndarray, bbox: BBox) -> BinaryMask:
        h, w = image.shape[:2]
        pixels = np.zeros((h, w), dtype=bool)
        x0 = int(np.clip(np.floor(bbox.x0), 0, w))
        y0 = int(np.clip(np.floor(bbox.y0), 0, h))
        x1 = int(np.clip(np.ceil(bbox.x1), 0, w))
        y1 = int(np.clip(np.ceil(bbox.y1), 0, h))
        pixels[y0:y1, x0:x1] = True
        return BinaryMask(pixels)

    def partition(self, image: np.ndarray, k: int) -> list[BinaryMask]:
        h, w = image.shape[:2]
        return grid_partition(w, h, k)
