"""Chat-style LLM/VLM backends for segment selection.

Real backends speak to an HTTP chat endpoint (system + user messages in,
text out) with credentials taken from an environment variable named in
config. The mock backend is fully offline: it answers from a fixture file
keyed by the prompt hash when one exists, otherwise it deterministically
echoes a selection out of the prompt's own transcript lines.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from pathlib import Path
from typing import Any, Optional, Protocol

from .core import Persona, render_timestamp
from .errors import BackendUnavailable, EmptySelection, PreconditionViolated
from .media import VideoMeta
from .selection import (
    ParsedSelection,
    PromptBundle,
    SelectionResponse,
    build_visual_prompt,
    parse_selection,
    sanitize_cutlist,
)
from .transcribe import Transcript

log = logging.getLogger(__name__)

_RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


class TransientBackendError(Exception):
    """Retryable transport or rate-limit failure."""


class ChatBackend(Protocol):
    backend_id: str

    def complete(self, system_text: str, user_text: str) -> str:
        ...


class HttpChatBackend:
    """POSTs chat messages to a configurable endpoint.

    Accepts either `{"text": ...}` or an OpenAI-style
    `choices[0].message.content` response body; anything else is used raw.
    """

    def __init__(
        self,
        url: str,
        model: Optional[str] = None,
        api_key_env: Optional[str] = None,
        timeout: float = 120.0,
        backend_id: str = "http-chat",
    ):
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.backend_id = backend_id

    def complete(self, system_text: str, user_text: str) -> str:
        import httpx

        headers = {"content-type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if not key:
                raise BackendUnavailable(
                    f"credential environment variable {self.api_key_env} is not set"
                )
            headers["authorization"] = f"Bearer {key}"
        payload: dict[str, Any] = {
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ]
        }
        if self.model:
            payload["model"] = self.model
        try:
            response = httpx.post(self.url, json=payload, headers=headers, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise TransientBackendError(f"transport failure: {exc}")
        if response.status_code in _RETRYABLE_STATUS:
            raise TransientBackendError(f"status {response.status_code}: {response.text[:200]}")
        if response.status_code >= 400:
            raise BackendUnavailable(f"status {response.status_code}: {response.text[:500]}")
        try:
            doc = response.json()
        except ValueError:
            return response.text
        if isinstance(doc, dict):
            if isinstance(doc.get("text"), str):
                return doc["text"]
            try:
                return doc["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError):
                pass
        return response.text


_TRANSCRIPT_LINE = re.compile(r"^\[(\d+\.\d{2}) - (\d+\.\d{2})\] (.+)$", re.MULTILINE)
_BUDGET_LINE = re.compile(r"maximum clip duration: ([\d.]+) seconds")
_DURATION_LINE = re.compile(r"Video duration: ([\d.]+) seconds")


class MockChatBackend:
    """Deterministic offline stand-in for the selection model."""

    def __init__(self, fixtures_dir: Optional[Path] = None, backend_id: str = "mock-chat"):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self.backend_id = backend_id

    def complete(self, system_text: str, user_text: str) -> str:
        if self.fixtures_dir:
            digest = hashlib.sha256(
                (system_text + "\x00" + user_text).encode("utf-8")
            ).hexdigest()
            for suffix in (".json", ".txt"):
                fixture = self.fixtures_dir / f"{digest}{suffix}"
                if fixture.exists():
                    return fixture.read_text(encoding="utf-8")
        lines = _TRANSCRIPT_LINE.findall(user_text)
        budget_match = _BUDGET_LINE.search(user_text)
        budget = float(budget_match.group(1)) if budget_match else 180.0
        if lines:
            return self._echo_from_transcript(lines, budget)
        return self._visual_scenes(user_text, budget)

    @staticmethod
    def _echo_from_transcript(lines: list[tuple[str, str, str]], budget: float) -> str:
        # first, last, and evenly spaced middles while the budget allows
        picks: list[int] = []
        order = [0]
        if len(lines) > 1:
            order.append(len(lines) - 1)
        for frac in (0.33, 0.55, 0.78, 0.2, 0.66):
            idx = round(frac * (len(lines) - 1))
            if idx not in order:
                order.append(idx)
        total = 0.0
        for idx in order:
            start, end, _ = lines[idx]
            duration = float(end) - float(start)
            if total + duration > budget:
                continue
            picks.append(idx)
            total += duration
            if len(picks) >= 6:
                break
        entries = [
            {
                "start": float(lines[i][0]),
                "end": float(lines[i][1]),
                "text": lines[i][2],
                "reason": "mock selection: representative coverage",
            }
            for i in sorted(picks)
        ]
        return json.dumps({"select_segments": entries}, indent=2)

    @staticmethod
    def _visual_scenes(user_text: str, budget: float) -> str:
        duration_match = _DURATION_LINE.search(user_text)
        duration = float(duration_match.group(1)) if duration_match else 60.0
        span = min(budget / 2.0, duration * 0.15, 20.0)
        span = max(span, 1.0)
        windows = [(0.1, "opening scene"), (0.7, "closing scene")]
        entries = []
        for frac, label in windows:
            start = round(duration * frac, 2)
            end = round(min(start + span, duration), 2)
            if end - start >= 1.0:
                entries.append(
                    {"start": start, "end": end, "text": f"{label} ({label} visuals)"}
                )
        return json.dumps({"select_segments": entries}, indent=2)


def backend_from_config(cfg: dict[str, Any]) -> ChatBackend:
    section = cfg.get("select", {}).get("backend", {"kind": "mock"})
    kind = section.get("kind", "mock")
    if kind == "mock":
        fixtures = section.get("fixtures_dir")
        return MockChatBackend(fixtures_dir=Path(fixtures) if fixtures else None)
    if kind == "http":
        return HttpChatBackend(
            url=section["url"],
            model=section.get("model"),
            api_key_env=section.get("api_key_env"),
            timeout=float(section.get("timeout", 120.0)),
            backend_id=section.get("backend_id", "http-chat"),
        )
    raise ValueError(f"unknown selection backend kind {kind!r}")


def request_selection(
    bundle: PromptBundle,
    backend: ChatBackend,
    transcript: Optional[Transcript] = None,
    source_duration: float = 0.0,
    retries: int = 3,
    base_delay: float = 0.2,
    allow_unverified_text: bool = False,
    on_raw: Optional[Any] = None,
) -> SelectionResponse:
    """Call the backend with bounded exponential-backoff retries.

    The raw response is captured verbatim and handed to `on_raw(bundle, raw)`
    before any interpretation, so callers can persist the exchange first.
    Parsing happens only when a transcript is supplied; a malformed response
    leaves `parsed` absent rather than raising.
    """
    attempts = 0
    last_error: Optional[Exception] = None
    raw: Optional[str] = None
    while attempts <= retries:
        attempts += 1
        try:
            raw = backend.complete(bundle.system_text, bundle.user_text)
            break
        except TransientBackendError as exc:
            last_error = exc
            if attempts > retries:
                break
            delay = base_delay * (2 ** (attempts - 1))
            log.warning("selection backend transient failure (%s); retry in %.2fs", exc, delay)
            time.sleep(delay)
    if raw is None:
        raise BackendUnavailable(
            f"selection backend failed after {attempts} attempts: {last_error}"
        )
    if on_raw is not None:
        on_raw(bundle, raw)

    response = SelectionResponse(raw=raw, attempts=attempts)
    if transcript is not None:
        try:
            parsed: ParsedSelection = parse_selection(
                raw, transcript, source_duration, allow_unverified_text=allow_unverified_text
            )
            response.parsed = parsed.cutlist
            response.annotations = parsed.annotations
        except EmptySelection as exc:
            response.annotations = getattr(exc, "annotations", [])
        except Exception as exc:  # SelectionParseError and friends: raw is preserved
            log.warning("selection response did not parse: %s", exc)
    return response


def select_visual(
    meta: VideoMeta,
    persona: Persona,
    backend: ChatBackend,
    transcript_empty: bool = False,
    retries: int = 3,
    base_delay: float = 0.2,
    on_raw: Optional[Any] = None,
) -> tuple[Any, SelectionResponse]:
    """Voiceover-free path: same prompt schema against a vision-capable
    backend; texts are scene descriptions, so the verbatim check is skipped.

    Returns (sanitized CutList, SelectionResponse).
    """
    if meta.has_audio and not transcript_empty:
        raise PreconditionViolated(
            "select_visual is only for sources without usable speech; "
            "route voiced videos through the transcript selector"
        )
    bundle = build_visual_prompt(str(meta.path), meta.duration, persona)
    empty_transcript = Transcript(segments=[], backend_id="none", source_duration=meta.duration)
    response = request_selection(
        bundle,
        backend,
        transcript=empty_transcript,
        source_duration=meta.duration,
        retries=retries,
        base_delay=base_delay,
        allow_unverified_text=True,
        on_raw=on_raw,
    )
    if response.parsed is None:
        raise EmptySelection("visual backend produced no parseable selection")
    cutlist = sanitize_cutlist(response.parsed, meta.duration, persona)
    return cutlist, response
