"""Parsers for model replies: boxes, candidate sets, verdicts, choices.

Parsers return None on failure so callers can apply the one-retry policy;
only the verdict parser never fails (garbage degrades to a reject).
"""

from __future__ import annotations

import re

from ..core import BBox, DiscreteDirection
from ..errors import InvalidDirectionLabelError
from ..motion import parse_direction_label

# lookbehind keeps digits inside identifiers (e.g. "x0=") out of the match
_NUMBER = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?")
_INTEGER = re.compile(r"(?<![\w.])-?\d+")
_VERDICT = re.compile(r"verdict\s*[:=]?\s*(approve|reject)", re.IGNORECASE)
_BARE_VERDICT = re.compile(r"\b(approve|reject)\b", re.IGNORECASE)
_LABELLED_FIELD = {
    "suggested_part": re.compile(r"suggested_part\s*[:=]\s*(.*)", re.IGNORECASE),
    "appearance_and_position": re.compile(
        r"appearance_and_position\s*[:=]\s*(.*)", re.IGNORECASE),
    "relative_position": re.compile(
        r"relative_position\s*[:=]\s*(.*)", re.IGNORECASE),
}
_BRACKETED = re.compile(r"\[[^\[\]]*\]")


def parse_bbox(text: str) -> BBox | None:
    """First four numbers as (x0, y0, x1, y1); None when invalid."""
    numbers = _NUMBER.findall(text)
    if len(numbers) < 4:
        return None
    x0, y0, x1, y1 = (float(v) for v in numbers[:4])
    try:
        return BBox(x0, y0, x1, y1)
    except ValueError:
        return None


def parse_candidate_set(text: str, k: int) -> tuple[int, ...] | None:
    """Candidate indices, validated against 1..k; sorted and deduplicated."""
    numbers = _INTEGER.findall(text)
    if not numbers:
        return None
    indices = sorted({int(v) for v in numbers})
    if any(i < 1 or i > k for i in indices):
        return None
    return tuple(indices)


def parse_choice(text: str) -> int | None:
    match = _INTEGER.search(text)
    return int(match.group()) if match else None


def parse_direction_reply(text: str) -> DiscreteDirection | None:
    """Strictly-validated bracketed direction label anywhere in the reply."""
    candidates = _BRACKETED.findall(text)
    if not candidates:
        candidates = [text]
    for candidate in candidates:
        try:
            return parse_direction_label(candidate)
        except InvalidDirectionLabelError:
            continue
    return None


def parse_verdict(text: str) -> tuple[str, dict[str, str], bool]:
    """(verdict, advisory fields, degraded).

    Accepts the labelled four-line format, a bare APPROVE/REJECT, and the
    compact 'reject: part; appearance; relative' form. Unparseable text is a
    degraded reject.
    """
    fields = {name: "" for name in _LABELLED_FIELD}
    match = _VERDICT.search(text) or _BARE_VERDICT.search(text)
    if match is None:
        return "reject", fields, True
    verdict = match.group(1).lower()

    labelled = False
    for name, pattern in _LABELLED_FIELD.items():
        m = pattern.search(text)
        if m:
            fields[name] = m.group(1).strip()
            labelled = True
    if verdict == "reject" and not labelled:
        # compact form: everything after the verdict token, ';'-separated
        rest = text[match.end():].lstrip(" :,-\t\n")
        parts = [p.strip() for p in rest.split(";") if p.strip()]
        for name, value in zip(_LABELLED_FIELD, parts):
            fields[name] = value
    degraded = verdict == "reject" and not any(fields.values())
    return verdict, fields, degraded
