"""Filesystem-backed job store and pipeline stage execution.

One directory per job holds the manifest, every artifact, and every
versioned cut-list. Manifests are written atomically (write-then-rename),
so a restarted service reconstructs all state from disk alone. Raw model
exchanges are persisted before any parsing happens.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from .. import llm as llm_mod
from .. import selection as selection_mod
from ..core import (
    CutList,
    CutSegment,
    Persona,
    TimeRange,
    cutlist_dumps,
    cutlist_from_dict,
    persona_from_dict,
    persona_to_dict,
    validate_cutlist,
)
from ..cutmerge import MergeConfig, burn_subtitles, generate_subtitles, merge, reframe
from ..errors import (
    ArtifactNotFound,
    ArtifactNotReady,
    ClipsmithError,
    EditRejected,
    EmptySelection,
    EmptyTranscript,
    InvalidTransition,
    JobCreateFailed,
    UnsupportedFormat,
)
from ..media import (
    SUPPORTED_CONTAINERS,
    Transcoder,
    container_for,
    extract_audio,
    probe_video,
)
from ..metrics import MetricsConfig, build_report, provider_from_config
from ..selection import build_prompt, heuristic_select, parse_selection, sanitize_cutlist
from ..transcribe import (
    Transcript,
    backend_from_config,
    detect_pauses,
    dual_transcribe,
    merge_fragments,
    transcript_dumps,
    transcript_from_dict,
)

log = logging.getLogger(__name__)

STATES = ("CREATED", "AUDIO_EXTRACTED", "TRANSCRIBED", "SELECTED", "MERGED", "FAILED")

# stage name -> (required current state, next state)
STAGE_TRANSITIONS = {
    "extract_audio": ("CREATED", "AUDIO_EXTRACTED"),
    "transcribe": ("AUDIO_EXTRACTED", "TRANSCRIBED"),
    "select": ("TRANSCRIBED", "SELECTED"),
    "merge": ("SELECTED", "MERGED"),
}

STAGE_ORDER = ("extract_audio", "transcribe", "select", "merge")

_ARTIFACT_KINDS = (
    "video", "audio", "transcript", "transcript_fast", "cutlist", "clip",
    "subtitles", "metrics", "llm_request", "llm_response",
)


@dataclass
class JobManifest:
    job_id: str
    state: str = "CREATED"
    persona: Persona = field(default_factory=lambda: Persona(role="general highlights editor"))
    artifacts: dict[str, str] = field(default_factory=dict)
    timestamps: dict[str, str] = field(default_factory=dict)
    media: dict[str, Any] = field(default_factory=dict)
    language: dict[str, Any] = field(default_factory=dict)
    voiceover_free: bool = False
    cutlist_version: int = 0
    clip_duration: Optional[float] = None
    error: Optional[str] = None
    failed_from: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "job_id": self.job_id,
            "state": self.state,
            "persona": persona_to_dict(self.persona),
            "artifacts": dict(sorted(self.artifacts.items())),
            "timestamps": dict(sorted(self.timestamps.items())),
            "media": self.media,
            "language": self.language,
            "voiceover_free": self.voiceover_free,
            "cutlist_version": self.cutlist_version,
            "clip_duration": self.clip_duration,
            "error": self.error,
            "failed_from": self.failed_from,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "JobManifest":
        return cls(
            job_id=doc["job_id"],
            state=doc.get("state", "CREATED"),
            persona=persona_from_dict(doc.get("persona", {"role": "general highlights editor"})),
            artifacts=dict(doc.get("artifacts", {})),
            timestamps=dict(doc.get("timestamps", {})),
            media=dict(doc.get("media", {})),
            language=dict(doc.get("language", {})),
            voiceover_free=bool(doc.get("voiceover_free", False)),
            cutlist_version=int(doc.get("cutlist_version", 0)),
            clip_duration=doc.get("clip_duration"),
            error=doc.get("error"),
            failed_from=doc.get("failed_from"),
        )


class JobStore:
    """One directory per job under `root`; per-job locks serialize transitions."""

    def __init__(self, root: str | Path, cfg: dict[str, Any]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.tool = Transcoder.from_config(cfg)
        self.deterministic = bool(cfg.get("mock"))
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._step_counter = 0

    # --- plumbing ---------------------------------------------------------

    def _lock(self, job_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(job_id, threading.Lock())

    def _now(self) -> str:
        if self.deterministic:
            self._step_counter += 1
            return f"step-{self._step_counter:04d}"
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def job_dir(self, job_id: str) -> Path:
        return self.root / job_id

    def _manifest_path(self, job_id: str) -> Path:
        return self.job_dir(job_id) / "manifest.json"

    def _write_manifest(self, manifest: JobManifest) -> None:
        path = self._manifest_path(manifest.job_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        tmp.replace(path)

    def get(self, job_id: str) -> JobManifest:
        path = self._manifest_path(job_id)
        if not path.exists():
            raise ArtifactNotFound(f"no such job: {job_id}")
        return JobManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_jobs(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "manifest.json").exists())

    # --- creation -----------------------------------------------------------

    def create_job(
        self,
        source_path: Optional[str | Path] = None,
        upload: Optional[bytes] = None,
        filename: Optional[str] = None,
        persona: Optional[Persona] = None,
        job_id: Optional[str] = None,
    ) -> JobManifest:
        """Admit a source video (local path or uploaded bytes) as a new job.

        The payload must probe as a supported container before any job
        directory is created.
        """
        persona = persona or persona_from_dict(self.cfg.get("persona", {}))
        if source_path is None and upload is None:
            raise JobCreateFailed("either source_path or an upload is required")

        if source_path is not None:
            src = Path(source_path)
            if not src.exists():
                raise JobCreateFailed(f"source file not found: {src}")
            container_for(src)  # raises UnsupportedFormat before any side effect
            payload = None
        else:
            name = filename or "upload.bin"
            container_for(Path(name))
            payload = upload
            src = None

        if job_id is None:
            if self.deterministic:
                digest = hashlib.sha256()
                digest.update((src.read_bytes() if src else payload or b""))
                digest.update(json.dumps(persona_to_dict(persona), sort_keys=True).encode())
                job_id = "job-" + digest.hexdigest()[:12]
            else:
                job_id = "job-" + uuid.uuid4().hex[:12]

        job_dir = self.job_dir(job_id)
        try:
            job_dir.mkdir(parents=True, exist_ok=True)
            if src is not None:
                video_path = job_dir / f"source{src.suffix.lower()}"
                if not video_path.exists() or video_path.stat().st_size != src.stat().st_size:
                    shutil.copyfile(src, video_path)
            else:
                video_path = job_dir / f"source{Path(filename or 'upload').suffix.lower()}"
                video_path.write_bytes(payload or b"")
        except OSError as exc:
            raise JobCreateFailed(f"cannot persist job payload: {exc}")

        manifest = JobManifest(job_id=job_id, persona=persona)
        manifest.artifacts["video"] = video_path.name
        manifest.timestamps["CREATED"] = self._now()
        self._write_manifest(manifest)
        log.info("created job %s from %s", job_id, filename or source_path)
        return manifest

    # --- state machine ------------------------------------------------------

    def advance(self, job_id: str, stage: str) -> JobManifest:
        """Run one pipeline stage; only the successor stage is accepted.

        A FAILED job may retry the stage it failed in. Module errors move
        the job to FAILED with the diagnostic retained.
        """
        if stage not in STAGE_TRANSITIONS:
            raise InvalidTransition(f"unknown stage {stage!r}; one of {list(STAGE_TRANSITIONS)}")
        with self._lock(job_id):
            manifest = self.get(job_id)
            required, target = STAGE_TRANSITIONS[stage]
            current = manifest.state
            if current == "FAILED":
                if manifest.failed_from != required:
                    raise InvalidTransition(
                        f"job failed in state {manifest.failed_from!r}; "
                        f"stage {stage!r} retries from {required!r}"
                    )
            elif current != required:
                raise InvalidTransition(
                    f"stage {stage!r} requires state {required!r}, job is in {current!r}"
                )
            try:
                runner = getattr(self, f"_stage_{stage}")
                runner(manifest)
            except ClipsmithError as exc:
                manifest.failed_from = required
                manifest.state = "FAILED"
                manifest.error = f"{type(exc).__name__}: {exc}"
                manifest.timestamps["FAILED"] = self._now()
                self._write_manifest(manifest)
                log.warning("job %s failed in %s: %s", job_id, stage, exc)
                return manifest
            manifest.state = target
            manifest.error = None
            manifest.failed_from = None
            manifest.timestamps[target] = self._now()
            self._write_manifest(manifest)
            return manifest

    def run_all(self, job_id: str) -> JobManifest:
        manifest = self.get(job_id)
        for stage in STAGE_ORDER:
            manifest = self.advance(job_id, stage)
            if manifest.state == "FAILED":
                break
        return manifest

    # --- stages ---------------------------------------------------------------

    def _video_meta(self, manifest: JobManifest):
        return probe_video(self.job_dir(manifest.job_id) / manifest.artifacts["video"], self.tool)

    def _stage_extract_audio(self, manifest: JobManifest) -> None:
        job_dir = self.job_dir(manifest.job_id)
        meta = self._video_meta(manifest)
        manifest.media = {
            "container": meta.container,
            "duration": meta.duration,
            "has_audio": meta.has_audio,
            "width": meta.width,
            "height": meta.height,
            "fps": meta.fps,
        }
        if not meta.has_audio:
            manifest.voiceover_free = True
            return
        artifact = extract_audio(meta, self.tool, job_dir / "audio.wav")
        manifest.artifacts["audio"] = "audio.wav"
        manifest.media["audio_extractor"] = artifact.extractor_used

    def _stage_transcribe(self, manifest: JobManifest) -> None:
        if manifest.voiceover_free:
            return  # visual selection path needs no transcript
        job_dir = self.job_dir(manifest.job_id)
        fast = backend_from_config(self.cfg, "fast")
        accurate = backend_from_config(self.cfg, "accurate")
        duration = manifest.media.get("duration", 0.0)
        try:
            forwarded, fast_t, verdict = dual_transcribe(
                job_dir / manifest.artifacts["audio"], fast, accurate,
                source_duration=duration,
            )
        except EmptyTranscript:
            manifest.voiceover_free = True
            manifest.language = {"status": "Unknown", "chosen": None,
                                 "details": "no speech detected"}
            return
        section = self.cfg.get("transcribe", {})
        merged = merge_fragments(
            forwarded,
            gap_threshold=float(section.get("gap_threshold", 0.3)),
            max_merged_duration=float(section.get("max_merged_duration", 30.0)),
        )
        (job_dir / "transcript.json").write_text(transcript_dumps(merged), encoding="utf-8")
        (job_dir / "transcript_fast.json").write_text(transcript_dumps(fast_t), encoding="utf-8")
        manifest.artifacts["transcript"] = "transcript.json"
        manifest.artifacts["transcript_fast"] = "transcript_fast.json"
        manifest.language = {
            "status": verdict.status,
            "chosen": verdict.chosen,
            "details": verdict.details,
        }

    def _load_transcript(self, manifest: JobManifest) -> Optional[Transcript]:
        rel = manifest.artifacts.get("transcript")
        if not rel:
            return None
        doc = json.loads((self.job_dir(manifest.job_id) / rel).read_text(encoding="utf-8"))
        return transcript_from_dict(doc)

    def _persona_id(self, persona: Persona) -> str:
        doc = json.dumps(persona_to_dict(persona), sort_keys=True).encode()
        return "persona-" + hashlib.sha256(doc).hexdigest()[:8]

    def _stage_select(self, manifest: JobManifest) -> None:
        job_dir = self.job_dir(manifest.job_id)
        persona = manifest.persona
        duration = float(manifest.media.get("duration", 0.0))
        transcript = self._load_transcript(manifest)
        mode = self.cfg.get("select", {}).get("mode", "heuristic")
        retries = int(self.cfg.get("select", {}).get("retries", 3))
        base_delay = float(self.cfg.get("select", {}).get("retry_base_delay", 0.2))

        def persist_raw(bundle, raw: str) -> None:
            # auditability precedes interpretation: raw lands on disk first
            (job_dir / "llm_request.txt").write_text(
                bundle.system_text + "\n\n--- user ---\n\n" + bundle.user_text,
                encoding="utf-8",
            )
            (job_dir / "llm_response.txt").write_text(raw, encoding="utf-8")
            manifest.artifacts["llm_request"] = "llm_request.txt"
            manifest.artifacts["llm_response"] = "llm_response.txt"
            self._write_manifest(manifest)

        if manifest.voiceover_free or transcript is None or not transcript.segments:
            backend = llm_mod.backend_from_config(self.cfg)
            meta = self._video_meta(manifest)
            cutlist, _response = llm_mod.select_visual(
                meta, persona, backend, transcript_empty=True,
                retries=retries, base_delay=base_delay, on_raw=persist_raw,
            )
        elif mode == "llm":
            backend = llm_mod.backend_from_config(self.cfg)
            bundle = build_prompt(transcript, persona)
            response = llm_mod.request_selection(
                bundle, backend, transcript=transcript, source_duration=duration,
                retries=retries, base_delay=base_delay, on_raw=persist_raw,
            )
            if response.parsed is None:
                raise EmptySelection(
                    "selection backend produced no parseable cut-list "
                    f"(raw preserved in llm_response.txt, {len(response.annotations)} annotations)"
                )
            cutlist = sanitize_cutlist(response.parsed, duration, persona, transcript=transcript)
        else:
            section = self.cfg.get("transcribe", {})
            pauses = detect_pauses(
                transcript, min_gap=float(section.get("pause_min_gap", 0.6))
            )
            cutlist = heuristic_select(
                transcript, persona, pauses,
                weights=self.cfg.get("select", {}).get("weights"),
            )

        cutlist.video_id = manifest.job_id
        cutlist.persona_id = self._persona_id(persona)
        validate_cutlist(cutlist, duration)
        self._write_cutlist_version(manifest, cutlist)

    def _write_cutlist_version(self, manifest: JobManifest, cutlist: CutList) -> None:
        version = manifest.cutlist_version + 1
        name = f"cutlist_v{version}.json"
        (self.job_dir(manifest.job_id) / name).write_text(
            cutlist_dumps(cutlist), encoding="utf-8"
        )
        manifest.cutlist_version = version
        manifest.artifacts["cutlist"] = name

    def _load_cutlist(self, manifest: JobManifest) -> CutList:
        rel = manifest.artifacts.get("cutlist")
        if not rel:
            raise ArtifactNotReady("no cut-list selected yet")
        doc = json.loads((self.job_dir(manifest.job_id) / rel).read_text(encoding="utf-8"))
        return cutlist_from_dict(doc)

    def _merge_config(self) -> MergeConfig:
        section = self.cfg.get("merge", {})
        return MergeConfig(
            fade_window=float(section.get("fade_window", 0.5)),
            video_quality=int(section.get("video_quality", 23)),
            encode_preset=str(section.get("encode_preset", "fast")),
            audio_bitrate=int(section.get("audio_bitrate", 128)),
            orientation=str(section.get("orientation", "horizontal")),
            burn_subtitles=bool(section.get("burn_subtitles", False)),
        )

    def _stage_merge(self, manifest: JobManifest) -> None:
        job_dir = self.job_dir(manifest.job_id)
        duration = float(manifest.media.get("duration", 0.0))
        cutlist = self._load_cutlist(manifest)
        validated = validate_cutlist(cutlist, duration, require_chronological=False)
        meta = self._video_meta(manifest)
        cfg = self._merge_config()

        workdir = job_dir / "clips"
        artifact = merge(meta, validated, cfg, workdir, self.tool)

        transcript = self._load_transcript(manifest)
        srt_path = None
        if transcript is not None and transcript.segments:
            srt_path = generate_subtitles(
                validated, transcript, artifact.segment_map, workdir / "final.srt"
            )
            manifest.artifacts["subtitles"] = f"clips/{srt_path.name}"
            if cfg.burn_subtitles:
                artifact = burn_subtitles(artifact, srt_path, self.tool)

        if cfg.orientation == "vertical":
            artifact = reframe(artifact, "vertical", self.tool)

        manifest.artifacts["clip"] = str(artifact.path.relative_to(job_dir))
        manifest.clip_duration = artifact.duration
        manifest.media["segment_map"] = [
            {"src": [s.start, s.end], "out": [d.start, d.end]}
            for s, d in artifact.segment_map
        ]

        if transcript is not None and transcript.segments:
            report = build_report(
                transcript, cutlist,
                MetricsConfig(tau=float(self.cfg.get("metrics", {}).get("tau", 0.6))),
                provider_from_config(self.cfg),
            )
            (job_dir / "metrics.json").write_text(
                json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
                encoding="utf-8",
            )
            manifest.artifacts["metrics"] = "metrics.json"

    # --- cut-list editing -------------------------------------------------------

    def patch_cutlist(self, job_id: str, edits: list[dict[str, Any]]) -> JobManifest:
        """Apply review edits (remove / adjust / reorder), re-sanitize,
        re-validate, persist a new cut-list version.

        Patching a MERGED job resets it to SELECTED for another merge round.
        A reorder edit must be the last edit and survives sanitation as an
        explicit playback permutation.
        """
        with self._lock(job_id):
            manifest = self.get(job_id)
            if manifest.state not in ("SELECTED", "MERGED"):
                raise EditRejected(
                    f"cut-list edits require state SELECTED or MERGED, job is {manifest.state!r}"
                )
            cutlist = self._load_cutlist(manifest)
            segments = list(cutlist.segments)
            duration = float(manifest.media.get("duration", 0.0))
            reorder: Optional[list[int]] = None

            for pos, edit in enumerate(edits):
                op = edit.get("op")
                if op == "remove":
                    index = self._edit_index(edit, len(segments))
                    del segments[index]
                elif op == "adjust":
                    index = self._edit_index(edit, len(segments))
                    seg = segments[index]
                    new_start = seg.range.start + float(edit.get("delta_start", 0.0))
                    new_end = seg.range.end + float(edit.get("delta_end", 0.0))
                    new_start = max(0.0, new_start)
                    new_end = min(duration, max(new_end, 0.0))
                    if new_end <= new_start:
                        raise EditRejected(
                            f"adjust at index {index} collapses the segment "
                            f"([{new_start:.2f}, {new_end:.2f}])"
                        )
                    segments[index] = CutSegment(
                        range=TimeRange(new_start, new_end),
                        text=seg.text, reason=seg.reason, score=seg.score,
                    )
                elif op == "reorder":
                    if pos != len(edits) - 1:
                        raise EditRejected("reorder must be the final edit in a patch")
                    order = edit.get("order")
                    if not isinstance(order, list):
                        raise EditRejected("reorder edit needs an order array")
                    reorder = [int(i) for i in order]
                else:
                    raise EditRejected(f"unknown edit op {op!r}")

            if not segments:
                raise EditRejected("edits removed every segment")

            draft = CutList(
                video_id=cutlist.video_id, persona_id=cutlist.persona_id, segments=segments
            )
            try:
                sanitized = sanitize_cutlist(
                    draft, duration, manifest.persona,
                    transcript=self._load_transcript(manifest),
                )
            except EmptySelection as exc:
                raise EditRejected(f"edits produced an empty cut-list: {exc}")

            if reorder is not None:
                if sorted(reorder) != list(range(len(sanitized.segments))):
                    raise EditRejected(
                        f"reorder {reorder} is not a permutation of "
                        f"0..{len(sanitized.segments) - 1} (after sanitation)"
                    )
                sanitized.segments = [sanitized.segments[i] for i in reorder]
            validate_cutlist(sanitized, duration, require_chronological=reorder is None)

            self._write_cutlist_version(manifest, sanitized)
            if manifest.state == "MERGED":
                manifest.state = "SELECTED"
                manifest.clip_duration = None
            manifest.timestamps[f"PATCHED_v{manifest.cutlist_version}"] = self._now()
            self._write_manifest(manifest)
            return manifest

    @staticmethod
    def _edit_index(edit: dict[str, Any], length: int) -> int:
        try:
            index = int(edit["index"])
        except (KeyError, TypeError, ValueError):
            raise EditRejected(f"edit needs an integer index: {edit}")
        if not (0 <= index < length):
            raise EditRejected(f"index {index} out of range for {length} segments")
        return index

    # --- artifacts -----------------------------------------------------------

    _READY_STATES = {
        "video": STATES,
        "audio": ("AUDIO_EXTRACTED", "TRANSCRIBED", "SELECTED", "MERGED"),
        "transcript": ("TRANSCRIBED", "SELECTED", "MERGED"),
        "transcript_fast": ("TRANSCRIBED", "SELECTED", "MERGED"),
        "cutlist": ("SELECTED", "MERGED"),
        "llm_request": ("SELECTED", "MERGED"),
        "llm_response": ("SELECTED", "MERGED"),
        "clip": ("MERGED",),
        "subtitles": ("MERGED",),
        "metrics": ("MERGED",),
    }

    def artifact_path(self, job_id: str, kind: str) -> Path:
        manifest = self.get(job_id)
        if kind not in _ARTIFACT_KINDS:
            raise ArtifactNotFound(f"unknown artifact kind {kind!r}")
        rel = manifest.artifacts.get(kind)
        if rel is None or not (self.job_dir(job_id) / rel).exists():
            ready_states = self._READY_STATES.get(kind, STATES)
            if manifest.state not in ready_states:
                raise ArtifactNotReady(
                    f"artifact {kind!r} not ready in state {manifest.state!r}"
                )
            raise ArtifactNotFound(f"artifact {kind!r} not present for job {job_id}")
        return self.job_dir(job_id) / rel

    def metrics_report(self, job_id: str, tau: Optional[float] = None) -> dict[str, Any]:
        manifest = self.get(job_id)
        transcript = self._load_transcript(manifest)
        if transcript is None or not transcript.segments:
            raise ArtifactNotReady("metrics need a transcript")
        cutlist = self._load_cutlist(manifest)
        cfg_tau = float(self.cfg.get("metrics", {}).get("tau", 0.6))
        report = build_report(
            transcript, cutlist,
            MetricsConfig(tau=tau if tau is not None else cfg_tau),
            provider_from_config(self.cfg),
        )
        return report.to_dict()
