"""Cut & merge: per-segment audio/visual fade with mandatory re-encode,
then concat-demuxer assembly, plus subtitle remapping and orientation
reframing.

Direct concatenation of raw cuts produces jump cuts, frame freezes, and
audio pops; every segment is therefore re-encoded with a fade at both ends
and only the uniformly-encoded intermediates are stream-copied together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .core import TimeRange, ValidatedCutList, normalize_timestamp, render_timestamp
from .errors import (
    ClipEncodeFailed,
    ConcatFailed,
    EmptyCutList,
    InvalidSegment,
    ReframeFailed,
)
from .media import Transcoder, VideoMeta, probe_video, run_transcoder
from .transcribe import Transcript

log = logging.getLogger(__name__)

_DURATION_SLACK = 0.011  # two-decimal rounding slack when checking bounds


@dataclass(frozen=True)
class MergeConfig:
    fade_window: float = 0.50
    video_quality: int = 23          # encoder rate factor (crf)
    encode_preset: str = "fast"
    audio_bitrate: int = 128         # kbps
    orientation: str = "horizontal"  # horizontal | vertical
    burn_subtitles: bool = False

    def __post_init__(self):
        if not (0 < self.fade_window <= 1.0):
            raise ValueError(f"fade_window must be in (0, 1.0], got {self.fade_window}")
        if self.orientation not in ("horizontal", "vertical"):
            raise ValueError(f"unknown orientation {self.orientation!r}")


@dataclass(frozen=True)
class ClipArtifact:
    path: Path
    duration: float
    segment_map: tuple[tuple[TimeRange, TimeRange], ...]
    config_used: MergeConfig


def effective_fade(duration: float, fade_window: float) -> float:
    """Fade length per end: the configured window, shrunk so the in and out
    ramps never overlap on short segments."""
    return normalize_timestamp(min(fade_window, duration / 2.0))


def process_clip(
    video: VideoMeta,
    r: TimeRange,
    cfg: MergeConfig,
    out: str | Path,
    tool: Transcoder,
) -> Path:
    """Cut [start, end), fade audio and video at both ends, re-encode.

    Never stream-copies: the re-encode is what removes jump cuts and
    boundary glitches at concat time.
    """
    start = getattr(r, "start", None)
    end = getattr(r, "end", None)
    if start is None or end is None or end <= start:
        raise InvalidSegment(f"invalid segment range [{start}, {end}]")
    if start < 0 or end > video.duration + _DURATION_SLACK:
        raise InvalidSegment(
            f"segment [{start}, {end}] outside source [0, {video.duration}]"
        )

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    duration = normalize_timestamp(end - start)
    fade = effective_fade(duration, cfg.fade_window)
    fade_out_start = normalize_timestamp(duration - fade)

    vf = (
        "format=yuv420p,"
        f"fade=t=in:st=0:d={render_timestamp(fade)},"
        f"fade=t=out:st={render_timestamp(fade_out_start)}:d={render_timestamp(fade)}"
    )
    args = [
        "-y",
        "-ss", render_timestamp(start),
        "-to", render_timestamp(end),
        "-i", str(video.path.resolve()),
        "-vf", vf,
    ]
    if video.has_audio:
        af = (
            f"afade=t=in:st=0:d={render_timestamp(fade)},"
            f"afade=t=out:st={render_timestamp(fade_out_start)}:d={render_timestamp(fade)}"
        )
        args += ["-af", af, "-c:a", "aac", "-b:a", f"{cfg.audio_bitrate}k"]
    args += [
        "-c:v", "libx264",
        "-preset", cfg.encode_preset,
        "-crf", str(cfg.video_quality),
        str(out.resolve()),
    ]

    result = run_transcoder(tool, args)
    if not result.ok:
        raise ClipEncodeFailed(
            f"encode failed for segment [{start}, {end}]: {result.stderr_tail.strip()}"
        )
    if not out.exists() or out.stat().st_size == 0:
        raise ClipEncodeFailed(f"encode produced no output for segment [{start}, {end}]")
    return out


def concat_clips(
    clips: Sequence[str | Path],
    out: str | Path,
    tool: Transcoder,
    list_path: Optional[str | Path] = None,
) -> Path:
    """Assemble uniformly-encoded clips with the concat demuxer (stream copy).

    Stream copy is safe here precisely because every input came out of
    process_clip with identical encode parameters.
    """
    if not clips:
        raise EmptyCutList("no clips to concatenate")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    list_path = Path(list_path) if list_path else out.parent / "list.txt"
    lines = []
    for clip in clips:
        p = Path(clip).resolve()
        if not p.exists():
            raise ConcatFailed(f"clip missing: {p}")
        escaped = str(p).replace("'", "'\\''")
        lines.append(f"file '{escaped}'")
    list_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    result = run_transcoder(
        tool,
        ["-y", "-f", "concat", "-safe", "0", "-i", str(list_path.resolve()),
         "-c", "copy", str(out.resolve())],
    )
    if not result.ok:
        raise ConcatFailed(f"concat failed: {result.stderr_tail.strip()}")
    if not out.exists() or out.stat().st_size == 0:
        raise ConcatFailed("concat produced no output")
    return out


def merge(
    video: VideoMeta,
    cutlist: ValidatedCutList,
    cfg: MergeConfig,
    workdir: str | Path,
    tool: Transcoder,
) -> ClipArtifact:
    """Run the full cut & merge over a validated cut-list.

    Segments are processed in cut-list order (the user's desired playback
    order) into workdir/clip_i, then concatenated. Intermediates are kept
    for audit. The segment map records source-to-output time correspondence
    from cumulative nominal durations.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    ext = video.path.suffix.lower() or ".mp4"

    clip_paths: list[Path] = []
    segment_map: list[tuple[TimeRange, TimeRange]] = []
    cursor = 0.0
    for i, seg in enumerate(cutlist.segments, start=1):
        clip_path = workdir / f"clip_{i}{ext}"
        try:
            process_clip(video, seg.range, cfg, clip_path, tool)
        except (ClipEncodeFailed, InvalidSegment) as exc:
            raise type(exc)(f"segment {i}: {exc}")
        clip_paths.append(clip_path)
        out_start = normalize_timestamp(cursor)
        out_end = normalize_timestamp(cursor + seg.range.duration)
        segment_map.append((seg.range, TimeRange(out_start, out_end)))
        cursor = out_end

    final_path = workdir / f"final{ext}"
    concat_clips(clip_paths, final_path, tool, list_path=workdir / "list.txt")

    merged_meta = probe_video(final_path, tool)
    artifact = ClipArtifact(
        path=final_path,
        duration=merged_meta.duration,
        segment_map=tuple(segment_map),
        config_used=cfg,
    )
    log.info(
        "merged %d segments into %s (%.2fs)", len(clip_paths), final_path, artifact.duration
    )
    return artifact


# ---------------------------------------------------------------------------
# subtitles
# ---------------------------------------------------------------------------

def _srt_time(seconds: float) -> str:
    ms = round(seconds * 1000)
    hours, ms = divmod(ms, 3600_000)
    minutes, ms = divmod(ms, 60_000)
    secs, ms = divmod(ms, 1000)
    return f"{hours:02d}:{minutes:02d}:{secs:02d},{ms:03d}"


def generate_subtitles(
    cutlist: ValidatedCutList,
    transcript: Transcript,
    segment_map: Sequence[tuple[TimeRange, TimeRange]],
    out_path: str | Path,
) -> Path:
    """Emit SRT cues for transcript speech that landed inside the cut ranges.

    Each cue is clipped to its cut's intersection and shifted into output
    time by that cut's offset. Cues are written in output order; times round
    to milliseconds per the SRT format.
    """
    out_path = Path(out_path)
    cues: list[tuple[float, float, str]] = []
    for ts in transcript.segments:
        for src, dst in segment_map:
            clipped = ts.range.intersect(src)
            if clipped is None:
                continue
            offset = dst.start - src.start
            cues.append((clipped.start + offset, clipped.end + offset, ts.text))
    cues.sort(key=lambda c: (c[0], c[1]))

    blocks = []
    for number, (start, end, text) in enumerate(cues, start=1):
        blocks.append(f"{number}\n{_srt_time(start)} --> {_srt_time(end)}\n{text}\n")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(blocks), encoding="utf-8")
    return out_path


def burn_subtitles(
    artifact: ClipArtifact,
    srt_path: str | Path,
    tool: Transcoder,
    out: Optional[str | Path] = None,
) -> ClipArtifact:
    """Re-encode the merged clip with the subtitle track drawn onto frames."""
    out = Path(out) if out else artifact.path.with_name(
        artifact.path.stem + "_subtitled" + artifact.path.suffix
    )
    cfg = artifact.config_used
    args = [
        "-y", "-i", str(artifact.path.resolve()),
        "-vf", f"subtitles={Path(srt_path).resolve()}",
        "-c:v", "libx264", "-preset", cfg.encode_preset, "-crf", str(cfg.video_quality),
        "-c:a", "aac", "-b:a", f"{cfg.audio_bitrate}k",
        str(Path(out).resolve()),
    ]
    result = run_transcoder(tool, args)
    if not result.ok:
        raise ClipEncodeFailed(f"subtitle burn-in failed: {result.stderr_tail.strip()}")
    return replace(artifact, path=Path(out))


# ---------------------------------------------------------------------------
# reframing
# ---------------------------------------------------------------------------

_VERTICAL_W, _VERTICAL_H = 1080, 1920


def _even(n: int) -> int:
    return n - (n % 2)


def reframe(
    artifact: ClipArtifact,
    orientation: str,
    tool: Transcoder,
    out: Optional[str | Path] = None,
) -> ClipArtifact:
    """Horizontal is the identity; vertical center-crops to 9:16 and scales
    to 1080x1920 (already-narrow sources are scaled and padded instead)."""
    if orientation == "horizontal":
        return artifact
    if orientation != "vertical":
        raise ReframeFailed(f"unknown orientation {orientation!r}")

    meta = probe_video(artifact.path, tool)
    if meta.width <= 0 or meta.height <= 0:
        raise ReframeFailed(f"cannot determine dimensions of {artifact.path}")

    if meta.width / meta.height > _VERTICAL_W / _VERTICAL_H:
        crop_w = _even(round(meta.height * _VERTICAL_W / _VERTICAL_H))
        vf = f"crop={crop_w}:{meta.height},scale={_VERTICAL_W}:{_VERTICAL_H}"
    else:
        scale = min(_VERTICAL_W / meta.width, _VERTICAL_H / meta.height)
        new_w = _even(round(meta.width * scale))
        new_h = _even(round(meta.height * scale))
        pad_x = (_VERTICAL_W - new_w) // 2
        pad_y = (_VERTICAL_H - new_h) // 2
        vf = (
            f"scale={new_w}:{new_h},"
            f"pad={_VERTICAL_W}:{_VERTICAL_H}:{pad_x}:{pad_y}"
        )

    out = Path(out) if out else artifact.path.with_name(
        artifact.path.stem + "_vertical" + artifact.path.suffix
    )
    cfg = artifact.config_used
    args = ["-y", "-i", str(artifact.path.resolve()), "-vf", vf]
    if meta.has_audio:
        args += ["-c:a", "aac", "-b:a", f"{cfg.audio_bitrate}k"]
    args += [
        "-c:v", "libx264", "-preset", cfg.encode_preset, "-crf", str(cfg.video_quality),
        str(Path(out).resolve()),
    ]
    result = run_transcoder(tool, args)
    if not result.ok:
        raise ReframeFailed(f"reframe failed: {result.stderr_tail.strip()}")
    return replace(artifact, path=Path(out))
