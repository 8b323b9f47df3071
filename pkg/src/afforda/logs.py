"""Append-only line-delimited record logs with a single-writer channel."""

from __future__ import annotations

import json
import threading
import warnings
from pathlib import Path

from .errors import ParseError, TornLogWarning


def canonical_json(record: dict) -> str:
    """Deterministic single-line serialization (sorted keys, tight separators)."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


class JsonlWriter:
    """Serializes appends from any number of threads through one lock.

    Each record becomes exactly one flushed line, so concurrent workers can
    never interleave partial records.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: dict) -> None:
        line = canonical_json(record) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()

    def __enter__(self) -> "JsonlWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def append_records(path, records) -> None:
    with JsonlWriter(path) as writer:
        for record in records:
            writer.append(record)


def read_jsonl(path) -> list[dict]:
    """Parse a record log; a torn (unterminated) final line is dropped with a
    warning, anything malformed earlier is an error."""
    raw = Path(path).read_text(encoding="utf-8")
    records: list[dict] = []
    if not raw:
        return records
    complete = raw.endswith("\n")
    lines = raw.split("\n")
    tail = lines.pop()  # "" when the file ends with a newline
    for number, line in enumerate(lines, start=1):
        if not line:
            raise ParseError(f"{path}: blank line {number}", line=number)
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {number}: {e}", line=number) from e
    if not complete and tail:
        warnings.warn(f"{path}: ignoring torn final line", TornLogWarning,
                      stacklevel=2)
    return records
