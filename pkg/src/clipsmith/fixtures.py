"""Synthetic test media: color bars plus a constant tone.

Offline stand-in for generating fixtures with a full transcoder's test
sources. Output is AVI (MJPEG + PCM) readable by the reference transcoder
and any ffmpeg build.
"""

from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np
from PIL import Image

from .avformat import AviWriter, encode_tags

# SMPTE-ish bar colors, left to right
_BAR_COLORS = [
    (192, 192, 192),
    (192, 192, 0),
    (0, 192, 192),
    (0, 192, 0),
    (192, 0, 192),
    (192, 0, 0),
    (0, 0, 192),
    (16, 16, 16),
]


def _bars_frame(width: int, height: int, t: float, duration: float) -> np.ndarray:
    frame = np.zeros((height, width, 3), dtype=np.uint8)
    bar_w = width // len(_BAR_COLORS)
    for i, color in enumerate(_BAR_COLORS):
        x0 = i * bar_w
        x1 = width if i == len(_BAR_COLORS) - 1 else (i + 1) * bar_w
        frame[:, x0:x1] = color
    # sweeping column marks elapsed time so frames are visually distinct
    sweep_x = min(width - 2, int(width * (t / duration))) if duration > 0 else 0
    frame[:, sweep_x : sweep_x + 2] = (255, 255, 255)
    return frame


def make_fixture(
    path: str | Path,
    duration: float = 60.0,
    width: int = 320,
    height: int = 240,
    fps: float = 25.0,
    tone_hz: float = 440.0,
    amplitude: float = 0.8,
    sample_rate: int = 16000,
    with_audio: bool = True,
) -> Path:
    """Write a synthetic bars+tone video; amplitude 0 gives silent audio."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_frames = round(duration * fps)

    writer = AviWriter(
        path,
        width=width,
        height=height,
        fps=fps,
        sample_rate=sample_rate if with_audio else None,
        channels=1,
        tags=encode_tags("clipsmith-fixture", {"synthetic": True, "tone_hz": tone_hz}),
    )

    pcm = None
    if with_audio:
        n_samples = round(duration * sample_rate)
        t = np.arange(n_samples, dtype=np.float64) / sample_rate
        signal = amplitude * np.sin(2 * math.pi * tone_hz * t)
        pcm = (signal * 32767).astype("<i2")

    cursor = 0
    for i in range(n_frames):
        frame = _bars_frame(width, height, i / fps, duration)
        buf = io.BytesIO()
        Image.fromarray(frame, "RGB").save(buf, format="JPEG", quality=85)
        writer.add_frame(buf.getvalue())
        if pcm is not None:
            target = min(round((i + 1) / fps * sample_rate), pcm.shape[0])
            if target > cursor:
                writer.add_audio(pcm[cursor:target].tobytes())
                cursor = target
    if pcm is not None and cursor < pcm.shape[0]:
        writer.add_audio(pcm[cursor:].tobytes())
    writer.close()
    return path
