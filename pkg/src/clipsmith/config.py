"""Configuration resolution: flags > environment > config file > defaults."""

from __future__ import annotations

import os
import shlex
import shutil
import sys
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

ENV_CONFIG = "CLIPSMITH_CONFIG"
ENV_FFMPEG = "CLIPSMITH_FFMPEG"
ENV_FFPROBE = "CLIPSMITH_FFPROBE"

DEFAULT_CONFIG_PATHS = [
    Path("clipsmith.yaml"),
    Path.home() / ".config" / "clipsmith.yaml",
]

DEFAULTS: dict[str, Any] = {
    "transcoder": {
        "ffmpeg": None,       # argv string/list; None resolves automatically
        "ffprobe": None,
        "timeout": 300.0,
    },
    "transcribe": {
        "fast": {"kind": "mock"},
        "accurate": {"kind": "mock"},
        "gap_threshold": 0.3,
        "max_merged_duration": 30.0,
        "pause_min_gap": 0.6,
    },
    "select": {
        "mode": "heuristic",  # heuristic | llm | visual(auto for silent sources)
        "backend": {"kind": "mock"},
        "weights": {"keyword": 0.5, "agenda": 0.25, "boundary": 0.25},
        "retries": 3,
        "retry_base_delay": 0.2,
    },
    "merge": {
        "fade_window": 0.5,
        "video_quality": 23,
        "encode_preset": "fast",
        "audio_bitrate": 128,
        "orientation": "horizontal",
        "burn_subtitles": False,
    },
    "metrics": {"tau": 0.6, "provider": "local"},
    "persona": {
        "role": "general highlights editor",
        "extra_requirements": "",
        "keywords": [],
        "max_duration": 180.0,
    },
    "service": {"host": "127.0.0.1", "port": 8237, "workdir": "clipsmith-jobs"},
    "mock": False,
}


def _deep_merge(base: dict, override: Mapping) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        elif value is not None:
            out[key] = value
    return out


def load_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping] = None,
    env: Optional[Mapping[str, str]] = None,
) -> dict[str, Any]:
    """Build the effective configuration dict.

    Precedence: explicit overrides > environment > config file > defaults.
    """
    env = os.environ if env is None else env
    cfg = dict(DEFAULTS)

    file_path = Path(path) if path else None
    if file_path is None and env.get(ENV_CONFIG):
        file_path = Path(env[ENV_CONFIG])
    if file_path is None:
        for candidate in DEFAULT_CONFIG_PATHS:
            if candidate.exists():
                file_path = candidate
                break
    if file_path is not None and file_path.exists():
        loaded = yaml.safe_load(file_path.read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {file_path} must contain a mapping")
        cfg = _deep_merge(cfg, loaded)

    env_over: dict[str, Any] = {}
    if env.get(ENV_FFMPEG):
        env_over.setdefault("transcoder", {})["ffmpeg"] = env[ENV_FFMPEG]
    if env.get(ENV_FFPROBE):
        env_over.setdefault("transcoder", {})["ffprobe"] = env[ENV_FFPROBE]
    if env_over:
        cfg = _deep_merge(cfg, env_over)

    if overrides:
        cfg = _deep_merge(cfg, overrides)
    return cfg


def _as_argv(value: Any) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return shlex.split(str(value))


def resolve_transcoder_argv(cfg: Mapping[str, Any]) -> tuple[list[str], list[str], float]:
    """Resolve (ffmpeg_argv, ffprobe_argv, timeout).

    Falls back to the bundled reference transcoder when no ffmpeg install
    is configured or discoverable on PATH.
    """
    section = cfg.get("transcoder", {})
    timeout = float(section.get("timeout", 300.0))

    ffmpeg = section.get("ffmpeg")
    ffprobe = section.get("ffprobe")

    if ffmpeg is None:
        found = shutil.which("ffmpeg")
        ffmpeg = [found] if found else [sys.executable, "-m", "clipsmith.refcoder", "ffmpeg"]
    else:
        ffmpeg = _as_argv(ffmpeg)

    if ffprobe is None:
        found = shutil.which("ffprobe")
        ffprobe = [found] if found else [sys.executable, "-m", "clipsmith.refcoder", "probe"]
    else:
        ffprobe = _as_argv(ffprobe)

    return ffmpeg, ffprobe, timeout
