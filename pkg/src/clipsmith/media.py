"""Source probing, audio extraction with two-strategy fallback, and the
external transcoder process wrapper used by every encode step."""

from __future__ import annotations

import json
import logging
import shutil
import subprocess
import tempfile
import time
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config import resolve_transcoder_argv
from .core import normalize_timestamp
from .errors import (
    ExtractionFailed,
    NoAudioStream,
    ProbeFailed,
    ToolNotFound,
    ToolTimeout,
    UnsupportedFormat,
)

log = logging.getLogger(__name__)

# container tag by extension; tags follow the common MIME-style names
SUPPORTED_CONTAINERS = {
    ".mp4": "MP4",
    ".m4v": "M4V",
    ".mov": "QuickTime",
    ".qt": "QuickTime",
    ".wmv": "WMV",
    ".webm": "WebM",
    ".avi": "MSVideo",
    ".mpg": "MPG",
    ".mpeg": "MPG",
    ".3gp": "3GPP",
    ".3gpp": "3GPP",
}

AUDIO_FORMATS = ("mp3", "wav", "m4a", "flac")

# ffmpeg demuxer names forced on the fallback extraction attempt
_DEMUXER_FOR_CONTAINER = {
    "MP4": "mov,mp4,m4a,3gp,3g2,mj2",
    "M4V": "mov,mp4,m4a,3gp,3g2,mj2",
    "QuickTime": "mov,mp4,m4a,3gp,3g2,mj2",
    "3GPP": "mov,mp4,m4a,3gp,3g2,mj2",
    "WMV": "asf",
    "WebM": "matroska,webm",
    "MSVideo": "avi",
    "MPG": "mpeg",
}

_STDERR_TAIL = 2000


@dataclass(frozen=True)
class VideoMeta:
    path: Path
    container: str
    duration: float
    has_audio: bool
    width: int
    height: int
    fps: float


@dataclass(frozen=True)
class AudioArtifact:
    path: Path
    format: str
    duration: float
    extractor_used: str  # "primary" | "fallback"


@dataclass(frozen=True)
class ProcessResult:
    returncode: int
    stdout: str
    stderr_tail: str
    elapsed_s: float

    @property
    def ok(self) -> bool:
        return self.returncode == 0


class Transcoder:
    """Binds resolved transcoder/probe argv prefixes and the default timeout."""

    def __init__(self, ffmpeg: list[str], ffprobe: list[str], timeout: float = 300.0):
        self.ffmpeg = list(ffmpeg)
        self.ffprobe = list(ffprobe)
        self.timeout = timeout

    @classmethod
    def from_config(cls, cfg: dict) -> "Transcoder":
        ffmpeg, ffprobe, timeout = resolve_transcoder_argv(cfg)
        return cls(ffmpeg, ffprobe, timeout)


def run_transcoder(
    tool: Transcoder,
    args: list[str],
    timeout: Optional[float] = None,
    probe: bool = False,
) -> ProcessResult:
    """Run one transcoder invocation, capturing exit status and stderr tail.

    All paths in `args` must be absolute; the child never depends on the
    caller's working directory.
    """
    argv = (tool.ffprobe if probe else tool.ffmpeg) + [str(a) for a in args]
    effective_timeout = tool.timeout if timeout is None else timeout
    start = time.monotonic()
    try:
        proc = subprocess.run(
            argv,
            capture_output=True,
            text=True,
            timeout=effective_timeout,
            cwd=tempfile.gettempdir(),
        )
    except FileNotFoundError as exc:
        raise ToolNotFound(f"transcoder executable not found: {argv[0]} ({exc})")
    except subprocess.TimeoutExpired:
        raise ToolTimeout(f"transcoder timed out after {effective_timeout}s: {' '.join(argv[:6])}…")
    elapsed = time.monotonic() - start
    return ProcessResult(
        returncode=proc.returncode,
        stdout=proc.stdout,
        stderr_tail=proc.stderr[-_STDERR_TAIL:],
        elapsed_s=elapsed,
    )


def container_for(path: Path) -> str:
    tag = SUPPORTED_CONTAINERS.get(path.suffix.lower())
    if tag is None:
        raise UnsupportedFormat(f"unsupported container extension: {path.suffix!r} ({path.name})")
    return tag


def probe_video(path: str | Path, tool: Transcoder) -> VideoMeta:
    """Probe a source file; read-only, authoritative for duration."""
    path = Path(path)
    if not path.exists():
        raise ProbeFailed(f"{path}: no such file")
    container = container_for(path)

    result = run_transcoder(
        tool,
        ["-v", "error", "-print_format", "json", "-show_format", "-show_streams", str(path.resolve())],
        probe=True,
    )
    if not result.ok:
        raise ProbeFailed(f"probe failed for {path}: {result.stderr_tail.strip()}")
    try:
        doc = json.loads(result.stdout)
    except json.JSONDecodeError as exc:
        raise ProbeFailed(f"probe produced unparseable output for {path}: {exc}")

    streams = doc.get("streams", [])
    video = next((s for s in streams if s.get("codec_type") == "video"), None)
    audio = next((s for s in streams if s.get("codec_type") == "audio"), None)
    if video is None:
        raise ProbeFailed(f"{path}: no video stream")

    try:
        duration = float(doc.get("format", {}).get("duration", 0.0))
    except (TypeError, ValueError):
        duration = 0.0
    if duration <= 0:
        raise ProbeFailed(f"{path}: probe reports non-positive duration")

    fps = 0.0
    rate = video.get("r_frame_rate") or video.get("avg_frame_rate") or ""
    if "/" in rate:
        num, den = rate.split("/", 1)
        if float(den) > 0:
            fps = float(num) / float(den)

    return VideoMeta(
        path=path,
        container=container,
        duration=normalize_timestamp(duration),
        has_audio=audio is not None,
        width=int(video.get("width", 0)),
        height=int(video.get("height", 0)),
        fps=fps,
    )


def _wav_duration(path: Path) -> float:
    with wave.open(str(path), "rb") as wf:
        rate = wf.getframerate()
        return wf.getnframes() / rate if rate else 0.0


def _audio_duration(path: Path, fmt: str, tool: Transcoder) -> float:
    if fmt == "wav":
        return _wav_duration(path)
    result = run_transcoder(
        tool, ["-v", "error", "-print_format", "json", "-show_format", str(path)], probe=True
    )
    if not result.ok:
        raise ExtractionFailed(f"cannot probe extracted audio {path}: {result.stderr_tail}")
    return float(json.loads(result.stdout)["format"]["duration"])


def _extraction_args(src: Path, out: Path, sample_rate: int, channels: int) -> list[str]:
    return ["-y", "-i", str(src), "-vn", "-ac", str(channels), "-ar", str(sample_rate), str(out)]


def extract_audio(
    video: VideoMeta,
    tool: Transcoder,
    out_path: str | Path,
    out_format: str = "wav",
    sample_rate: int = 16000,
    channels: int = 1,
) -> AudioArtifact:
    """Extract the audio track, falling back to a sanitized-path re-invocation.

    The fallback copies the source to a short ASCII temp path and forces the
    input demuxer, which sidesteps long-filename and path-encoding failures
    of the direct attempt. Exactly one of the two strategies is recorded in
    the artifact.
    """
    if out_format not in AUDIO_FORMATS:
        raise ExtractionFailed(f"unsupported audio format {out_format!r}")
    if not video.has_audio:
        raise NoAudioStream(f"{video.path} has no audio stream")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    def _attempt(src: Path, forced_demuxer: Optional[str]) -> Optional[str]:
        """Returns None on success, else a diagnostic string."""
        args = _extraction_args(src.resolve(), out_path.resolve(), sample_rate, channels)
        if forced_demuxer:
            args = ["-y", "-f", forced_demuxer] + args[1:]
        try:
            result = run_transcoder(tool, args)
        except (ToolTimeout, ToolNotFound) as exc:
            return str(exc)
        if not result.ok:
            return f"exit {result.returncode}: {result.stderr_tail.strip()}"
        if not out_path.exists() or out_path.stat().st_size == 0:
            return "transcoder produced an empty output file"
        try:
            duration = _audio_duration(out_path, out_format, tool)
        except (ExtractionFailed, wave.Error, EOFError, KeyError, ValueError) as exc:
            return f"output unreadable: {exc}"
        if abs(duration - video.duration) > 0.5:
            return f"output duration {duration:.2f}s deviates from source {video.duration:.2f}s"
        return None

    primary_error = _attempt(video.path, None)
    if primary_error is None:
        return AudioArtifact(
            path=out_path,
            format=out_format,
            duration=normalize_timestamp(_audio_duration(out_path, out_format, tool)),
            extractor_used="primary",
        )

    log.warning("primary audio extraction failed (%s); trying fallback", primary_error)
    tmpdir = Path(tempfile.mkdtemp(prefix="cs_xa_"))
    sanitized = tmpdir / f"in{video.path.suffix.lower()}"
    try:
        shutil.copyfile(video.path, sanitized)
        fallback_error = _attempt(sanitized, _DEMUXER_FOR_CONTAINER.get(video.container))
    finally:
        shutil.rmtree(tmpdir, ignore_errors=True)

    if fallback_error is None:
        return AudioArtifact(
            path=out_path,
            format=out_format,
            duration=normalize_timestamp(_audio_duration(out_path, out_format, tool)),
            extractor_used="fallback",
        )
    raise ExtractionFailed(
        f"both extraction strategies failed for {video.path}: "
        f"primary: {primary_error}; fallback: {fallback_error}"
    )
