"""Domain types and timestamp arithmetic shared by every pipeline stage.

All times are seconds normalized to exactly two decimal places, rounding
half away from zero. Ranges are half-open ([start, end)), so adjacent
segments do not overlap.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from typing import Any, Iterable, Optional

from .errors import (
    CutListInvalid,
    EmptyCutList,
    InvalidTimeRange,
    InvalidTimestamp,
    TimeParseError,
)

_CLOCK_HMS = re.compile(r"^(\d+):([0-5]?\d):([0-5]?\d(?:\.\d+)?)$")
_CLOCK_MS = re.compile(r"^(\d+):([0-5]?\d(?:\.\d+)?)$")
_DECIMAL = re.compile(r"^\+?\d+(?:\.\d+)?$")


def normalize_timestamp(value: float) -> float:
    """Round a non-negative seconds value to two decimals, half away from zero.

    Idempotent: normalizing an already-normalized value is a no-op.
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidTimestamp(f"not a number: {value!r}")
    if not math.isfinite(value):
        raise InvalidTimestamp(f"non-finite timestamp: {value!r}")
    if value < 0:
        raise InvalidTimestamp(f"negative timestamp: {value!r}")
    # Quantize on the shortest decimal repr, not the raw binary float, so
    # a literal like 12.345 rounds up to 12.35 as a reader would expect.
    quantized = Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return float(quantized)


def render_timestamp(value: float) -> str:
    """Render a normalized timestamp with exactly two fractional digits."""
    return f"{value:.2f}"


def parse_time_to_seconds(raw: str) -> float:
    """Parse a seconds literal or clock form (H:MM:SS(.fff) / MM:SS(.fff)).

    Returns a normalized two-decimal seconds value.
    """
    if not isinstance(raw, str):
        raise TimeParseError(repr(raw))
    text = raw.strip()
    if not text:
        raise TimeParseError(raw)

    m = _CLOCK_HMS.match(text)
    if m:
        hours, minutes, seconds = int(m.group(1)), int(m.group(2)), float(m.group(3))
        return normalize_timestamp(hours * 3600 + minutes * 60 + seconds)
    m = _CLOCK_MS.match(text)
    if m:
        minutes, seconds = int(m.group(1)), float(m.group(2))
        return normalize_timestamp(minutes * 60 + seconds)
    if _DECIMAL.match(text):
        try:
            return normalize_timestamp(float(text))
        except (ValueError, InvalidOperation):
            raise TimeParseError(raw)
    raise TimeParseError(raw)


@dataclass(frozen=True)
class TimeRange:
    """Half-open range [start, end) in normalized seconds."""

    start: float
    end: float

    def __post_init__(self):
        object.__setattr__(self, "start", normalize_timestamp(self.start))
        object.__setattr__(self, "end", normalize_timestamp(self.end))
        if self.end <= self.start:
            raise InvalidTimeRange(f"end {self.end} must be greater than start {self.start}")

    @property
    def duration(self) -> float:
        return normalize_timestamp(self.end - self.start)

    def overlaps(self, other: "TimeRange") -> bool:
        return self.start < other.end and other.start < self.end

    def intersect(self, other: "TimeRange") -> Optional["TimeRange"]:
        lo, hi = max(self.start, other.start), min(self.end, other.end)
        if hi <= lo:
            return None
        return TimeRange(lo, hi)


@dataclass(frozen=True)
class CutSegment:
    """One selected segment: a source range plus its verbatim transcript text."""

    range: TimeRange
    text: str
    reason: Optional[str] = None
    score: Optional[float] = None

    def __post_init__(self):
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise CutListInvalid(f"score {self.score} outside [0, 1]")


@dataclass
class CutList:
    """Ordered selected segments; the pipeline's central editable artifact.

    The segment order is the playback order. Sanitation keeps it
    chronological; an explicit user reorder may permute it afterwards.
    """

    video_id: str
    persona_id: str
    segments: list[CutSegment] = field(default_factory=list)

    @property
    def total_duration(self) -> float:
        return normalize_timestamp(sum(s.range.duration for s in self.segments))


@dataclass(frozen=True)
class ValidatedCutList:
    """A cut-list that passed `validate_cutlist` against a source duration."""

    cutlist: CutList
    source_duration: float

    @property
    def segments(self) -> list[CutSegment]:
        return self.cutlist.segments

    @property
    def total_duration(self) -> float:
        return self.cutlist.total_duration


@dataclass
class Persona:
    """User-facing selection profile: role, extras, keywords, clip budget."""

    role: str
    extra_requirements: str = ""
    keywords: list[str] = field(default_factory=list)
    max_duration: float = 180.0

    def __post_init__(self):
        if self.max_duration <= 0:
            raise ValueError(f"max_duration must be positive, got {self.max_duration}")


def validate_cutlist(
    cutlist: CutList,
    source_duration: float,
    require_chronological: bool = True,
) -> ValidatedCutList:
    """Assert all cut-list invariants against the source duration.

    Checks: non-empty, every segment inside [0, source_duration], pairwise
    non-overlapping, and (unless a user reorder is being preserved)
    chronological order. Raises CutListInvalid with the offending index.
    """
    if not cutlist.segments:
        raise EmptyCutList("cut-list has no segments")
    duration = normalize_timestamp(source_duration)

    for i, seg in enumerate(cutlist.segments):
        if seg.range.start < 0 or seg.range.end > duration:
            raise CutListInvalid(
                f"segment {i} [{seg.range.start}, {seg.range.end}] outside "
                f"[0, {duration}]",
                index=i,
            )

    if require_chronological:
        for i in range(1, len(cutlist.segments)):
            if cutlist.segments[i].range.start < cutlist.segments[i - 1].range.start:
                raise CutListInvalid(f"segment {i} out of chronological order", index=i)

    by_start = sorted(range(len(cutlist.segments)), key=lambda i: cutlist.segments[i].range.start)
    for k in range(1, len(by_start)):
        prev = cutlist.segments[by_start[k - 1]].range
        cur = cutlist.segments[by_start[k]].range
        if cur.start < prev.end:
            raise CutListInvalid(
                f"segment {by_start[k]} overlaps segment {by_start[k - 1]}",
                index=by_start[k],
            )

    return ValidatedCutList(cutlist=cutlist, source_duration=duration)


# --- select_segments wire format --------------------------------------------

def cutlist_to_dict(cutlist: CutList) -> dict[str, Any]:
    """Serialize to the shared `select_segments` document structure."""
    segments = []
    for seg in cutlist.segments:
        entry: dict[str, Any] = {
            "start": seg.range.start,
            "end": seg.range.end,
            "text": seg.text,
        }
        if seg.reason is not None:
            entry["reason"] = seg.reason
        if seg.score is not None:
            entry["score"] = round(seg.score, 4)
        segments.append(entry)
    return {
        "video_id": cutlist.video_id,
        "persona_id": cutlist.persona_id,
        "select_segments": segments,
        "total_duration": cutlist.total_duration,
    }


def cutlist_from_dict(doc: dict[str, Any]) -> CutList:
    """Rebuild a CutList from its `select_segments` document."""
    if "select_segments" not in doc:
        raise CutListInvalid("document has no select_segments field")
    segments = []
    for entry in doc["select_segments"]:
        segments.append(
            CutSegment(
                range=TimeRange(float(entry["start"]), float(entry["end"])),
                text=str(entry.get("text", "")),
                reason=entry.get("reason"),
                score=entry.get("score"),
            )
        )
    return CutList(
        video_id=str(doc.get("video_id", "")),
        persona_id=str(doc.get("persona_id", "")),
        segments=segments,
    )


def cutlist_dumps(cutlist: CutList) -> str:
    """Deterministic JSON rendering (stable key order, stable spacing)."""
    return json.dumps(cutlist_to_dict(cutlist), sort_keys=True, indent=2) + "\n"


def persona_to_dict(persona: Persona) -> dict[str, Any]:
    return {
        "role": persona.role,
        "extra_requirements": persona.extra_requirements,
        "keywords": list(persona.keywords),
        "max_duration": persona.max_duration,
    }


def persona_from_dict(doc: dict[str, Any]) -> Persona:
    return Persona(
        role=str(doc.get("role", "")),
        extra_requirements=str(doc.get("extra_requirements", "")),
        keywords=[str(k) for k in doc.get("keywords", [])],
        max_duration=float(doc.get("max_duration", 180.0)),
    )


def overlapping_pairs(ranges: Iterable[TimeRange]) -> list[tuple[int, int]]:
    """Index pairs of overlapping ranges; brute-force helper for validation."""
    items = list(ranges)
    out = []
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i].overlaps(items[j]):
                out.append((i, j))
    return out
