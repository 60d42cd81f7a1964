"""Reference transcoder: an ffmpeg-compatible CLI subset in pure Python.

Implements exactly the invocations the pipeline issues (probe, cut with
audio/video fades and re-encode, concat-demuxer stream copy, audio
extraction, crop/scale/pad reframing) over RIFF/AVI with MJPEG video and
PCM s16le audio. It is the drop-in transcoder for hosts without ffmpeg;
when a real ffmpeg is configured the pipeline sends it the same arguments.

Two personalities, selected by entry point:
    clipsmith-ffmpeg   (or: python -m clipsmith.refcoder ffmpeg ...)
    clipsmith-ffprobe  (or: python -m clipsmith.refcoder probe ...)
"""

from __future__ import annotations

import io
import json
import math
import re
import struct
import sys
import wave
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import avformat
from .avformat import AviReader, AviWriter

SOFTWARE = "clipsmith-refcoder 0.1.0"


def _fail(message: str) -> "int":
    print(message, file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# probe personality
# ---------------------------------------------------------------------------

def _probe_wav(path: Path) -> dict:
    with wave.open(str(path), "rb") as wf:
        rate = wf.getframerate()
        n = wf.getnframes()
        channels = wf.getnchannels()
    duration = n / rate if rate else 0.0
    return {
        "format": {
            "filename": str(path),
            "format_name": "wav",
            "duration": f"{duration:.6f}",
            "size": str(path.stat().st_size),
            "nb_streams": 1,
        },
        "streams": [
            {
                "index": 0,
                "codec_type": "audio",
                "codec_name": "pcm_s16le",
                "sample_rate": str(rate),
                "channels": channels,
                "duration": f"{duration:.6f}",
            }
        ],
    }


def _probe_avi(path: Path) -> dict:
    info = avformat.read_avi_info(path)
    streams = []
    if info.has_video:
        fps = info.video.fps
        rate_num = round(fps * 1000)
        streams.append(
            {
                "index": len(streams),
                "codec_type": "video",
                "codec_name": "mjpeg",
                "width": info.video.width,
                "height": info.video.height,
                "r_frame_rate": f"{rate_num}/1000",
                "avg_frame_rate": f"{rate_num}/1000",
                "nb_frames": str(info.video.n_frames),
                "duration": f"{info.video_duration:.6f}",
            }
        )
    if info.has_audio:
        streams.append(
            {
                "index": len(streams),
                "codec_type": "audio",
                "codec_name": "pcm_s16le",
                "sample_rate": str(info.audio.sample_rate),
                "channels": info.audio.channels,
                "duration": f"{info.audio_duration:.6f}",
            }
        )
    fmt = {
        "filename": str(path),
        "format_name": "avi",
        "duration": f"{info.duration:.6f}",
        "size": str(path.stat().st_size),
        "nb_streams": len(streams),
    }
    if info.tags:
        fmt["tags"] = info.tags
    return {"format": fmt, "streams": streams}


def ffprobe_main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if "-version" in args or "--version" in args:
        print(f"{SOFTWARE} (probe personality)")
        return 0
    path: Path | None = None
    i = 0
    while i < len(args):
        arg = args[i]
        if arg in ("-v", "-loglevel", "-print_format", "-of", "-select_streams"):
            i += 2
            continue
        if arg in ("-show_format", "-show_streams", "-show_entries", "-hide_banner"):
            i += 1
            continue
        if arg == "-i":
            path = Path(args[i + 1])
            i += 2
            continue
        if not arg.startswith("-"):
            path = Path(arg)
        i += 1

    if path is None:
        return _fail("probe: no input file given")
    if not path.exists():
        return _fail(f"probe: {path}: no such file")
    try:
        if path.stat().st_size == 0:
            return _fail(f"probe: {path}: empty file")
        with open(path, "rb") as fh:
            magic = fh.read(12)
        if magic[:4] == b"RIFF" and magic[8:12] == b"AVI ":
            doc = _probe_avi(path)
        elif magic[:4] == b"RIFF" and magic[8:12] == b"WAVE":
            doc = _probe_wav(path)
        else:
            return _fail(f"probe: {path}: unrecognized container")
    except (avformat.AviFormatError, wave.Error, struct.error, EOFError, OSError) as exc:
        return _fail(f"probe: {path}: {exc}")
    print(json.dumps(doc, indent=1))
    return 0


# ---------------------------------------------------------------------------
# ffmpeg personality: argument model
# ---------------------------------------------------------------------------

class Invocation:
    def __init__(self):
        self.overwrite = False
        self.seek_start: float | None = None
        self.stop_at: float | None = None
        self.input_format: str | None = None
        self.input: Path | None = None
        self.vf: list[tuple[str, dict]] = []
        self.af: list[tuple[str, dict]] = []
        self.video_codec: str | None = None
        self.audio_codec: str | None = None
        self.stream_copy = False
        self.preset: str | None = None
        self.crf: int | None = None
        self.audio_bitrate: str | None = None
        self.drop_video = False
        self.drop_audio = False
        self.channels: int | None = None
        self.sample_rate: int | None = None
        self.output_format: str | None = None
        self.output: Path | None = None


def _parse_filter_chain(spec: str) -> list[tuple[str, dict]]:
    """Parse "name=a:b,name2=k=v:k2=v2" into (name, options) pairs."""
    chain = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" in part:
            name, argstr = part.split("=", 1)
        else:
            name, argstr = part, ""
        options: dict = {"_positional": []}
        for token in argstr.split(":") if argstr else []:
            if "=" in token:
                key, value = token.split("=", 1)
                options[key] = value
            else:
                options["_positional"].append(token)
        chain.append((name.strip(), options))
    return chain


def _parse_args(args: list[str]) -> Invocation:
    inv = Invocation()
    pending: dict = {}
    i = 0
    while i < len(args):
        arg = args[i]

        def value() -> str:
            nonlocal i
            i += 1
            if i >= len(args):
                raise ValueError(f"missing value for option {arg}")
            return args[i]

        if arg == "-y":
            inv.overwrite = True
        elif arg in ("-v", "-loglevel"):
            value()
        elif arg in ("-hide_banner", "-nostdin", "-stats", "-nostats"):
            pass
        elif arg == "-ss":
            pending["ss"] = float(value())
        elif arg == "-to":
            pending["to"] = float(value())
        elif arg == "-t":
            pending["t"] = float(value())
        elif arg == "-f":
            if inv.input is None:
                inv.input_format = value()
            else:
                inv.output_format = value()
        elif arg == "-safe":
            value()
        elif arg == "-i":
            inv.input = Path(value())
            inv.seek_start = pending.pop("ss", None)
            inv.stop_at = pending.pop("to", None)
            if "t" in pending:
                start = inv.seek_start or 0.0
                inv.stop_at = start + pending.pop("t")
        elif arg == "-vf":
            inv.vf = _parse_filter_chain(value())
        elif arg == "-af":
            inv.af = _parse_filter_chain(value())
        elif arg in ("-c:v", "-vcodec"):
            inv.video_codec = value()
        elif arg in ("-c:a", "-acodec"):
            inv.audio_codec = value()
        elif arg == "-c":
            codec = value()
            if codec == "copy":
                inv.stream_copy = True
            else:
                inv.video_codec = inv.audio_codec = codec
        elif arg == "-preset":
            inv.preset = value()
        elif arg == "-crf":
            inv.crf = int(value())
        elif arg == "-b:a":
            inv.audio_bitrate = value()
        elif arg == "-pix_fmt":
            value()
        elif arg == "-vn":
            inv.drop_video = True
        elif arg == "-an":
            inv.drop_audio = True
        elif arg == "-ac":
            inv.channels = int(value())
        elif arg == "-ar":
            inv.sample_rate = int(value())
        elif arg.startswith("-"):
            raise ValueError(f"Unrecognized option '{arg}'")
        else:
            inv.output = Path(arg)
        i += 1

    # trailing -ss/-to with no following -i act on the output side; treat
    # them the same way since we decode everything anyway
    if "ss" in pending:
        inv.seek_start = pending["ss"]
    if "to" in pending:
        inv.stop_at = pending["to"]
    return inv


# ---------------------------------------------------------------------------
# decode / filter / encode
# ---------------------------------------------------------------------------

def _decode_jpeg(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _encode_jpeg(frame: np.ndarray, quality: int) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(frame, "RGB").save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def _crf_to_quality(crf: int | None) -> int:
    if crf is None:
        crf = 23
    return max(30, min(96, 96 - crf))


def _fade_gain(t: float, kind: str, start: float, duration: float) -> float:
    if duration <= 0:
        return 1.0
    x = (t - start) / duration
    x = min(1.0, max(0.0, x))
    return x if kind == "in" else 1.0 - x


def _fade_params(options: dict) -> tuple[str, float, float]:
    positional = options.get("_positional", [])
    kind = options.get("t") or options.get("type") or (positional[0] if positional else "in")
    start = float(options.get("st", options.get("start_time", positional[1] if len(positional) > 1 else 0.0)))
    duration = float(options.get("d", options.get("duration", positional[2] if len(positional) > 2 else 0.0)))
    return kind, start, duration


class _SubtitleOverlay:
    """Burns SRT cues onto frames with Pillow's default font."""

    def __init__(self, srt_path: Path):
        self.cues = _parse_srt(srt_path.read_text(encoding="utf-8"))

    def active_text(self, t: float) -> str | None:
        for start, end, text in self.cues:
            if start <= t < end:
                return text
        return None

    def apply(self, frame: np.ndarray, t: float) -> np.ndarray:
        text = self.active_text(t)
        if not text:
            return frame
        img = Image.fromarray(frame, "RGB")
        draw = ImageDraw.Draw(img)
        w, h = img.size
        bbox = draw.textbbox((0, 0), text)
        tw, th = bbox[2] - bbox[0], bbox[3] - bbox[1]
        x, y = max(0, (w - tw) // 2), h - th - 8
        draw.rectangle([x - 4, y - 2, x + tw + 4, y + th + 4], fill=(0, 0, 0))
        draw.text((x, y), text, fill=(255, 255, 255))
        return np.asarray(img, dtype=np.uint8)


def _parse_srt(text: str) -> list[tuple[float, float, str]]:
    cues = []
    pattern = re.compile(
        r"(\d{2}):(\d{2}):(\d{2})[,.](\d{3})\s*-->\s*(\d{2}):(\d{2}):(\d{2})[,.](\d{3})"
    )
    for block in re.split(r"\n\s*\n", text.strip()):
        lines = [ln for ln in block.splitlines() if ln.strip()]
        if len(lines) < 2:
            continue
        m = pattern.search(lines[1] if lines[0].strip().isdigit() else lines[0])
        if not m:
            continue
        h1, m1, s1, ms1, h2, m2, s2, ms2 = (int(g) for g in m.groups())
        start = h1 * 3600 + m1 * 60 + s1 + ms1 / 1000
        end = h2 * 3600 + m2 * 60 + s2 + ms2 / 1000
        body_index = 2 if lines[0].strip().isdigit() else 1
        body = " ".join(lines[body_index:]).strip()
        cues.append((start, end, body))
    return cues


def _apply_video_filters(
    frames: "list[np.ndarray]", fps: float, chain: list[tuple[str, dict]]
) -> list[np.ndarray]:
    out = frames
    for name, options in chain:
        positional = options.get("_positional", [])
        if name in ("format", "setsar", "setpts", "fps"):
            continue
        if name == "fade":
            kind, start, duration = _fade_params(options)
            faded = []
            for idx, frame in enumerate(out):
                gain = _fade_gain(idx / fps, kind, start, duration)
                if gain >= 1.0:
                    faded.append(frame)
                else:
                    faded.append((frame.astype(np.float32) * gain).astype(np.uint8))
            out = faded
        elif name == "crop":
            width = int(float(positional[0]))
            height = int(float(positional[1]))
            if out:
                fh, fw = out[0].shape[:2]
                x = int(float(positional[2])) if len(positional) > 2 else (fw - width) // 2
                y = int(float(positional[3])) if len(positional) > 3 else (fh - height) // 2
                x, y = max(0, x), max(0, y)
                out = [f[y : y + height, x : x + width] for f in out]
        elif name == "scale":
            width = int(float(positional[0]))
            height = int(float(positional[1]))
            out = [
                np.asarray(
                    Image.fromarray(f, "RGB").resize((width, height), Image.BILINEAR),
                    dtype=np.uint8,
                )
                for f in out
            ]
        elif name == "pad":
            width = int(float(positional[0]))
            height = int(float(positional[1]))
            x = int(float(positional[2])) if len(positional) > 2 else 0
            y = int(float(positional[3])) if len(positional) > 3 else 0
            padded = []
            for f in out:
                canvas = np.zeros((height, width, 3), dtype=np.uint8)
                fh, fw = f.shape[:2]
                canvas[y : y + fh, x : x + fw] = f
                padded.append(canvas)
            out = padded
        elif name == "subtitles":
            overlay = _SubtitleOverlay(Path(positional[0] if positional else options.get("filename", "")))
            out = [overlay.apply(f, idx / fps) for idx, f in enumerate(out)]
        else:
            raise ValueError(f"unsupported video filter '{name}'")
    return out


def _apply_audio_filters(
    samples: np.ndarray, rate: int, chain: list[tuple[str, dict]]
) -> np.ndarray:
    out = samples.astype(np.float32)
    n = out.shape[0]
    for name, options in chain:
        if name == "afade":
            kind, start, duration = _fade_params(options)
            t = np.arange(n, dtype=np.float32) / rate
            if duration > 0:
                x = np.clip((t - start) / duration, 0.0, 1.0)
                gain = x if kind == "in" else 1.0 - x
            else:
                gain = np.ones(n, dtype=np.float32)
            out = out * gain[:, None]
        elif name in ("aresample", "anull"):
            continue
        else:
            raise ValueError(f"unsupported audio filter '{name}'")
    return out


def _resample(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    if src_rate == dst_rate or samples.shape[0] == 0:
        return samples
    n_src = samples.shape[0]
    n_dst = round(n_src * dst_rate / src_rate)
    src_t = np.arange(n_src, dtype=np.float64) / src_rate
    dst_t = np.arange(n_dst, dtype=np.float64) / dst_rate
    channels = [np.interp(dst_t, src_t, samples[:, c]) for c in range(samples.shape[1])]
    return np.stack(channels, axis=1).astype(np.float32)


def _read_input(path: Path) -> tuple[list[bytes] | None, float, np.ndarray | None, int, dict]:
    """Returns (jpeg_frames, fps, samples[n, ch] float32, rate, tags)."""
    with open(path, "rb") as fh:
        magic = fh.read(12)
    if magic[:4] == b"RIFF" and magic[8:12] == b"AVI ":
        with AviReader(path) as reader:
            info = reader.info
            frames = []
            pcm = []
            for fourcc, payload in reader.iter_chunks():
                if fourcc == avformat.VIDEO_CHUNK:
                    frames.append(payload)
                elif fourcc == avformat.AUDIO_CHUNK:
                    pcm.append(payload)
        samples = None
        rate = 0
        if info.has_audio:
            raw = np.frombuffer(b"".join(pcm), dtype="<i2")
            channels = max(1, info.audio.channels)
            raw = raw[: (len(raw) // channels) * channels]
            samples = raw.reshape(-1, channels).astype(np.float32)
            rate = info.audio.sample_rate
        return (frames if info.has_video else None, info.video.fps, samples, rate, info.tags)
    if magic[:4] == b"RIFF" and magic[8:12] == b"WAVE":
        with wave.open(str(path), "rb") as wf:
            rate = wf.getframerate()
            channels = wf.getnchannels()
            raw = np.frombuffer(wf.readframes(wf.getnframes()), dtype="<i2")
        samples = raw.reshape(-1, channels).astype(np.float32)
        return (None, 0.0, samples, rate, {})
    raise ValueError(f"{path}: unrecognized container")


def _write_wav(path: Path, samples: np.ndarray, rate: int) -> None:
    clipped = np.clip(samples, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(clipped.shape[1])
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(clipped.tobytes())


def _run_concat(inv: Invocation) -> int:
    entries = []
    for line in inv.input.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = re.match(r"file\s+'(.*)'\s*$", line)
        if not m:
            m = re.match(r"file\s+(.+)$", line)
        if not m:
            return _fail(f"concat: cannot parse list line: {line}")
        entries.append(Path(m.group(1).replace("'\\''", "'")))
    if not entries:
        return _fail("concat: empty list file")

    infos = []
    for p in entries:
        if not p.is_absolute():
            p = inv.input.parent / p
        try:
            infos.append((p, avformat.read_avi_info(p)))
        except (avformat.AviFormatError, OSError) as exc:
            return _fail(f"concat: {p}: {exc}")

    first = infos[0][1]
    for p, info in infos[1:]:
        same_video = (
            info.has_video == first.has_video
            and info.video.width == first.video.width
            and info.video.height == first.video.height
            and abs(info.video.fps - first.video.fps) < 1e-6
        )
        same_audio = (
            info.has_audio == first.has_audio
            and info.audio.sample_rate == first.audio.sample_rate
            and info.audio.channels == first.audio.channels
        )
        if not (same_video and same_audio):
            return _fail(f"concat: {p}: stream parameters differ from {infos[0][0]}")

    tags = dict(first.tags)
    tags["ISFT"] = SOFTWARE
    writer = AviWriter(
        inv.output,
        width=first.video.width,
        height=first.video.height,
        fps=first.video.fps,
        sample_rate=first.audio.sample_rate if first.has_audio else None,
        channels=first.audio.channels if first.has_audio else 1,
        tags=tags,
    )
    # true stream copy: chunks pass through without decoding
    for p, _ in infos:
        with AviReader(p) as reader:
            for fourcc, payload in reader.iter_chunks():
                if fourcc == avformat.VIDEO_CHUNK:
                    writer.add_frame(payload)
                elif fourcc == avformat.AUDIO_CHUNK:
                    writer.add_audio(payload)
    writer.close()
    return 0


def _run_transcode(inv: Invocation) -> int:
    try:
        frames, fps, samples, rate, _ = _read_input(inv.input)
    except (ValueError, avformat.AviFormatError, wave.Error, OSError) as exc:
        return _fail(f"{inv.input}: {exc}")

    start = inv.seek_start or 0.0
    if inv.drop_video:
        frames = None
    if inv.drop_audio:
        samples = None

    if frames is not None:
        stop = inv.stop_at if inv.stop_at is not None else len(frames) / fps
        first = round(start * fps)
        last = round(stop * fps)
        frames = frames[first:last]
        if not frames:
            return _fail(f"{inv.input}: cut window [{start}, {stop}] selects no frames")

    if samples is not None:
        stop = inv.stop_at if inv.stop_at is not None else samples.shape[0] / rate
        samples = samples[round(start * rate) : round(stop * rate)]

    decoded = None
    if frames is not None:
        decoded = [_decode_jpeg(f) for f in frames]
        if inv.vf:
            try:
                decoded = _apply_video_filters(decoded, fps, inv.vf)
            except (ValueError, IndexError, OSError) as exc:
                return _fail(f"video filter failed: {exc}")

    if samples is not None:
        if inv.af:
            try:
                samples = _apply_audio_filters(samples, rate, inv.af)
            except (ValueError, IndexError) as exc:
                return _fail(f"audio filter failed: {exc}")
        if inv.channels and inv.channels != samples.shape[1]:
            if inv.channels == 1:
                samples = samples.mean(axis=1, keepdims=True)
            else:
                samples = np.repeat(samples[:, :1], inv.channels, axis=1)
        if inv.sample_rate and inv.sample_rate != rate:
            samples = _resample(samples, rate, inv.sample_rate)
            rate = inv.sample_rate

    suffix = inv.output.suffix.lower()
    if inv.output_format == "wav" or suffix == ".wav":
        if samples is None:
            return _fail("no audio stream to write")
        _write_wav(inv.output, samples, rate)
        return 0

    if decoded is None:
        return _fail("no video stream to write (use a .wav output for audio-only)")

    quality = _crf_to_quality(inv.crf)
    params = {
        "video_codec_requested": inv.video_codec or "mjpeg",
        "crf": inv.crf if inv.crf is not None else 23,
        "preset": inv.preset or "fast",
        "audio_codec_requested": inv.audio_codec or "pcm_s16le",
        "audio_bitrate": inv.audio_bitrate or "",
        "reencoded": True,
    }
    height, width = decoded[0].shape[:2]
    writer = AviWriter(
        inv.output,
        width=width,
        height=height,
        fps=fps,
        sample_rate=rate if samples is not None else None,
        channels=samples.shape[1] if samples is not None else 1,
        tags=avformat.encode_tags(SOFTWARE, params),
    )
    clipped = None
    if samples is not None:
        clipped = np.clip(samples, -32768, 32767).astype("<i2")
    cursor = 0
    for idx, frame in enumerate(decoded):
        writer.add_frame(_encode_jpeg(frame, quality))
        if clipped is not None:
            target = round((idx + 1) / fps * rate)
            target = min(target, clipped.shape[0])
            if target > cursor:
                writer.add_audio(clipped[cursor:target].tobytes())
                cursor = target
    if clipped is not None and cursor < clipped.shape[0]:
        writer.add_audio(clipped[cursor:].tobytes())
    writer.close()
    return 0


def ffmpeg_main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if "-version" in args or "--version" in args:
        print(f"{SOFTWARE} (ffmpeg-compatible subset)")
        return 0
    try:
        inv = _parse_args(args)
    except ValueError as exc:
        return _fail(str(exc))
    if inv.input is None:
        return _fail("no input file given (use -i)")
    if inv.output is None:
        return _fail("no output file given")
    if not inv.input.exists():
        return _fail(f"{inv.input}: No such file or directory")
    if inv.output.exists() and not inv.overwrite:
        return _fail(f"{inv.output}: already exists (use -y to overwrite)")
    inv.output.parent.mkdir(parents=True, exist_ok=True)

    if inv.input_format == "concat":
        if not inv.stream_copy:
            return _fail("concat: only stream copy (-c copy) is supported")
        return _run_concat(inv)
    if inv.stream_copy:
        return _fail("stream copy outside concat is not supported (re-encode instead)")
    return _run_transcode(inv)


def main() -> int:
    if len(sys.argv) < 2 or sys.argv[1] not in ("ffmpeg", "probe", "ffprobe"):
        print("usage: python -m clipsmith.refcoder {ffmpeg|probe} [args...]", file=sys.stderr)
        return 2
    personality = sys.argv[1]
    rest = sys.argv[2:]
    if personality == "ffmpeg":
        return ffmpeg_main(rest)
    return ffprobe_main(rest)


if __name__ == "__main__":
    sys.exit(main())
