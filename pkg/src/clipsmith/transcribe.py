"""Transcriber backends and transcript post-processing.

Two backend roles exist: "fast" (better language identification) and
"accurate" (better sentence boundaries and timestamps). The dual flow runs
both, cross-validates the detected language, and forwards the accurate
transcript; on a language mismatch the accurate backend is re-run with the
fast backend's language forced.
"""

from __future__ import annotations

import hashlib
import json
import random
import subprocess
import wave
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Protocol

import numpy as np

from .core import TimeRange, normalize_timestamp
from .errors import BackendUnavailable, EmptyTranscript

_SILENCE_PEAK = 80  # int16 counts; below this the mock treats audio as silent

TERMINAL_PUNCTUATION = ".!?…。！？"
_TRAILING_WRAPPERS = "\"'”’)»]"


@dataclass(frozen=True)
class TranscriptSegment:
    index: int
    range: TimeRange
    text: str
    language: Optional[str] = None
    confidence: Optional[float] = None


@dataclass
class Transcript:
    segments: list[TranscriptSegment] = field(default_factory=list)
    backend_id: str = ""
    detected_language: Optional[str] = None
    source_duration: float = 0.0

    @property
    def full_text(self) -> str:
        return " ".join(s.text for s in self.segments)


@dataclass(frozen=True)
class LanguageVerdict:
    status: str  # Confirmed | Mismatch | Unknown
    chosen: Optional[str]
    details: str = ""


# --- interchange format -------------------------------------------------------

def transcript_to_dict(t: Transcript) -> dict[str, Any]:
    return {
        "backend_id": t.backend_id,
        "language": t.detected_language,
        "duration": t.source_duration,
        "segments": [
            {"index": s.index, "start": s.range.start, "end": s.range.end, "text": s.text}
            for s in t.segments
        ],
    }


def transcript_from_dict(doc: dict[str, Any]) -> Transcript:
    segments = [
        TranscriptSegment(
            index=int(entry.get("index", i)),
            range=TimeRange(float(entry["start"]), float(entry["end"])),
            text=str(entry.get("text", "")).strip(),
            language=entry.get("language"),
            confidence=entry.get("confidence"),
        )
        for i, entry in enumerate(doc.get("segments", []))
    ]
    return Transcript(
        segments=segments,
        backend_id=str(doc.get("backend_id", "")),
        detected_language=doc.get("language"),
        source_duration=float(doc.get("duration", 0.0)),
    )


def transcript_dumps(t: Transcript) -> str:
    return json.dumps(transcript_to_dict(t), sort_keys=True, indent=2) + "\n"


# --- backends ----------------------------------------------------------------

class TranscriberBackend(Protocol):
    backend_id: str

    def run(self, audio_path: Path, forced_language: Optional[str]) -> dict[str, Any]:
        """Produce an interchange-format transcript document."""
        ...


_PHRASE_BANK = [
    ("Welcome everyone and thank you for joining this session", True),
    ("Today we will walk through the full agenda", True),
    ("First let's look at the study design and", False),
    ("the enrollment numbers across all participating sites.", True),
    ("The primary endpoint was met with a clear margin", True),
    ("which is an encouraging signal for the treatment arm.", True),
    ("Second we review the safety profile in detail", True),
    ("Adverse events remained consistent with prior reports", True),
    ("Let me highlight the dosing schedule because", False),
    ("it differs from the earlier protocol in two ways.", True),
    ("Patients reported better tolerability at the lower dose", True),
    ("and the pharmacokinetic data support that observation.", True),
    ("Moving on to the biomarker analysis now", True),
    ("The response correlates strongly with baseline expression", True),
    ("Finally we discuss the next steps for the program", True),
    ("To wrap up the plan is to open enrollment next quarter", True),
    ("In summary the results support advancing to the next phase", True),
    ("Thank you for your attention and let's take questions.", True),
]


def synthesize_transcript(duration: float, seed: int, language: str = "en") -> list[dict]:
    """Deterministic scripted transcript for mock runs: fragmented lines,
    small intra-sentence gaps, occasional long pauses."""
    rng = random.Random(seed)
    segments = []
    cursor = round(rng.uniform(0.5, 1.5), 2)
    idx = 0
    bank_pos = rng.randrange(len(_PHRASE_BANK))
    while cursor < duration - 3.0:
        text, _ = _PHRASE_BANK[bank_pos % len(_PHRASE_BANK)]
        bank_pos += 1
        words = len(text.split())
        seg_duration = round(0.32 * words + rng.uniform(0.2, 0.6), 2)
        end = round(min(cursor + seg_duration, duration - 0.5), 2)
        if end - cursor < 0.4:
            break
        segments.append({"index": idx, "start": cursor, "end": end, "text": text})
        idx += 1
        gap = 0.1 if rng.random() < 0.7 else round(rng.uniform(0.8, 1.6), 2)
        cursor = round(end + gap, 2)
    return segments


class MockTranscriber:
    """Deterministic offline backend.

    Looks up a fixture document keyed by the audio file's SHA-256; absent a
    fixture it synthesizes a scripted transcript seeded by that hash, and
    reports no speech for silent audio.
    """

    def __init__(
        self,
        backend_id: str = "mock-accurate",
        fixtures_dir: Optional[Path] = None,
        default_language: str = "en",
    ):
        self.backend_id = backend_id
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self.default_language = default_language

    def run(self, audio_path: Path, forced_language: Optional[str]) -> dict[str, Any]:
        audio_path = Path(audio_path)
        if not audio_path.exists():
            raise BackendUnavailable(f"mock transcriber: audio file missing: {audio_path}")
        digest = hashlib.sha256(audio_path.read_bytes()).hexdigest()

        if self.fixtures_dir:
            fixture = self.fixtures_dir / f"{digest}.json"
            if fixture.exists():
                doc = json.loads(fixture.read_text(encoding="utf-8"))
                if forced_language:
                    doc["language"] = forced_language
                doc.setdefault("backend_id", self.backend_id)
                return doc

        duration, peak = _wav_stats(audio_path)
        if peak < _SILENCE_PEAK:
            segments: list[dict] = []
        else:
            segments = synthesize_transcript(duration, int(digest[:12], 16))
        return {
            "backend_id": self.backend_id,
            "language": forced_language or self.default_language,
            "duration": duration,
            "segments": segments,
        }


def _wav_stats(path: Path) -> tuple[float, int]:
    with wave.open(str(path), "rb") as wf:
        rate = wf.getframerate()
        n = wf.getnframes()
        duration = n / rate if rate else 0.0
        raw = wf.readframes(n)
    if not raw:
        return duration, 0
    samples = np.frombuffer(raw, dtype="<i2")
    return duration, int(np.abs(samples).max())


class CommandTranscriber:
    """Runs an external transcriber command that prints interchange JSON.

    The argv template may use {audio} and {language} placeholders.
    """

    def __init__(self, argv_template: list[str], backend_id: str, timeout: float = 600.0):
        self.argv_template = list(argv_template)
        self.backend_id = backend_id
        self.timeout = timeout

    def run(self, audio_path: Path, forced_language: Optional[str]) -> dict[str, Any]:
        argv = []
        for token in self.argv_template:
            token = token.replace("{audio}", str(audio_path))
            if "{language}" in token:
                if not forced_language:
                    continue
                token = token.replace("{language}", forced_language)
            argv.append(token)
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
        except (FileNotFoundError, subprocess.TimeoutExpired) as exc:
            raise BackendUnavailable(f"transcriber command failed: {exc}")
        if proc.returncode != 0:
            raise BackendUnavailable(
                f"transcriber command exit {proc.returncode}: {proc.stderr[-500:]}"
            )
        try:
            return json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            raise BackendUnavailable(f"transcriber command produced unparseable output: {exc}")


class HttpTranscriber:
    """POSTs audio bytes to an HTTP transcription endpoint."""

    def __init__(self, url: str, backend_id: str, timeout: float = 600.0):
        self.url = url
        self.backend_id = backend_id
        self.timeout = timeout

    def run(self, audio_path: Path, forced_language: Optional[str]) -> dict[str, Any]:
        import httpx

        params = {"language": forced_language} if forced_language else {}
        try:
            response = httpx.post(
                self.url,
                params=params,
                content=Path(audio_path).read_bytes(),
                headers={"content-type": "application/octet-stream"},
                timeout=self.timeout,
            )
            response.raise_for_status()
            return response.json()
        except Exception as exc:  # httpx error taxonomy is broad; wrap it whole
            raise BackendUnavailable(f"transcriber endpoint {self.url} failed: {exc}")


def backend_from_config(cfg: dict[str, Any], role: str) -> TranscriberBackend:
    section = cfg.get("transcribe", {}).get(role, {"kind": "mock"})
    kind = section.get("kind", "mock")
    backend_id = section.get("backend_id", f"mock-{role}")
    if kind == "mock":
        fixtures = section.get("fixtures_dir")
        return MockTranscriber(
            backend_id=backend_id,
            fixtures_dir=Path(fixtures) if fixtures else None,
            default_language=section.get("language", "en"),
        )
    if kind == "command":
        return CommandTranscriber(section["argv"], backend_id=section.get("backend_id", role))
    if kind == "http":
        return HttpTranscriber(section["url"], backend_id=section.get("backend_id", role))
    raise ValueError(f"unknown transcriber kind {kind!r} for role {role!r}")


# --- operations ----------------------------------------------------------------

def transcribe(
    audio_path: str | Path,
    backend: TranscriberBackend,
    forced_language: Optional[str] = None,
    source_duration: Optional[float] = None,
) -> Transcript:
    """Run one backend and normalize its output into a sorted Transcript."""
    doc = backend.run(Path(audio_path), forced_language)
    transcript = transcript_from_dict(doc)
    transcript.backend_id = transcript.backend_id or backend.backend_id
    if forced_language:
        transcript.detected_language = forced_language
    if source_duration is not None:
        transcript.source_duration = normalize_timestamp(source_duration)

    duration = transcript.source_duration
    cleaned = []
    for seg in sorted(transcript.segments, key=lambda s: s.range.start):
        start, end = seg.range.start, seg.range.end
        if duration > 0:
            if start >= duration:
                continue
            end = min(end, duration)
        if end <= start:
            continue
        cleaned.append(
            TranscriptSegment(
                index=len(cleaned),
                range=TimeRange(start, end),
                text=seg.text.strip(),
                language=seg.language,
                confidence=seg.confidence,
            )
        )
    transcript.segments = cleaned
    if not cleaned:
        raise EmptyTranscript(f"backend {transcript.backend_id} returned no speech segments")
    return transcript


def cross_validate_language(fast_t: Transcript, accurate_t: Transcript) -> LanguageVerdict:
    """Compare language tags; the fast backend wins disputes."""
    fast_tag = fast_t.detected_language
    accurate_tag = accurate_t.detected_language
    if not fast_tag or not accurate_tag:
        chosen = fast_tag or accurate_tag
        return LanguageVerdict("Unknown", chosen, "one or both backends reported no language")
    if fast_tag == accurate_tag:
        return LanguageVerdict("Confirmed", fast_tag, "both backends agree")
    return LanguageVerdict(
        "Mismatch",
        fast_tag,
        f"accurate backend reported {accurate_tag!r}; re-run it with "
        f"forced_language={fast_tag!r}",
    )


def _ends_sentence(text: str) -> bool:
    stripped = text.rstrip().rstrip(_TRAILING_WRAPPERS)
    return bool(stripped) and stripped[-1] in TERMINAL_PUNCTUATION


def merge_fragments(
    t: Transcript,
    gap_threshold: float = 0.3,
    max_merged_duration: float = 30.0,
) -> Transcript:
    """Join consecutive fragments that were split mid-sentence.

    A join happens when the earlier text lacks terminal punctuation, the gap
    is under the threshold, and the merged span stays under the cap.
    Idempotent for a fixed threshold.
    """
    if not t.segments:
        return t
    merged: list[TranscriptSegment] = []
    current = t.segments[0]
    for nxt in t.segments[1:]:
        gap = nxt.range.start - current.range.end
        span = nxt.range.end - current.range.start
        if (
            not _ends_sentence(current.text)
            and gap < gap_threshold
            and span <= max_merged_duration
        ):
            current = TranscriptSegment(
                index=current.index,
                range=TimeRange(current.range.start, nxt.range.end),
                text=f"{current.text} {nxt.text}".strip(),
                language=current.language,
                confidence=None,
            )
        else:
            merged.append(current)
            current = nxt
    merged.append(current)
    reindexed = [
        TranscriptSegment(i, s.range, s.text, s.language, s.confidence)
        for i, s in enumerate(merged)
    ]
    return Transcript(
        segments=reindexed,
        backend_id=t.backend_id,
        detected_language=t.detected_language,
        source_duration=t.source_duration,
    )


def detect_pauses(t: Transcript, min_gap: float = 0.6) -> list[TimeRange]:
    """Inter-segment gaps of at least min_gap, plus leading/trailing silence."""
    pauses: list[TimeRange] = []
    if not t.segments:
        if t.source_duration >= min_gap:
            pauses.append(TimeRange(0.0, t.source_duration))
        return pauses
    first = t.segments[0]
    if first.range.start >= min_gap:
        pauses.append(TimeRange(0.0, first.range.start))
    for prev, nxt in zip(t.segments, t.segments[1:]):
        if nxt.range.start - prev.range.end >= min_gap:
            pauses.append(TimeRange(prev.range.end, nxt.range.start))
    last = t.segments[-1]
    if t.source_duration > 0 and t.source_duration - last.range.end >= min_gap:
        pauses.append(TimeRange(last.range.end, t.source_duration))
    return pauses


def dual_transcribe(
    audio_path: str | Path,
    fast_backend: TranscriberBackend,
    accurate_backend: TranscriberBackend,
    source_duration: Optional[float] = None,
    forced_language: Optional[str] = None,
) -> tuple[Transcript, Transcript, LanguageVerdict]:
    """Quality-control flow: both backends in parallel, language cross-check,
    accurate re-run with forced language on mismatch.

    Returns (forwarded_transcript, fast_transcript, verdict); the forwarded
    transcript is always the accurate backend's.
    """
    with ThreadPoolExecutor(max_workers=2) as pool:
        fast_future = pool.submit(
            transcribe, audio_path, fast_backend, forced_language, source_duration
        )
        accurate_future = pool.submit(
            transcribe, audio_path, accurate_backend, forced_language, source_duration
        )
        fast_t = fast_future.result()
        accurate_t = accurate_future.result()

    verdict = cross_validate_language(fast_t, accurate_t)
    if verdict.status == "Mismatch" and verdict.chosen:
        accurate_t = transcribe(
            audio_path, accurate_backend, forced_language=verdict.chosen,
            source_duration=source_duration,
        )
    return accurate_t, fast_t, verdict
