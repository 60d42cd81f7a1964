"""Command-line surface: every pipeline stage standalone, an end-to-end run,
the evaluation harness, and the review service.

Stage outputs are files, so stages compose in the shell exactly the way the
service composes them internally. Exit codes: 0 success, 1 pipeline error,
2 usage error, 3 missing/failed external tool.
"""

from __future__ import annotations

import functools
import json
import sys
import wave
from pathlib import Path
from typing import Optional

import click

from . import llm as llm_mod
from .config import load_config
from .core import (
    Persona,
    cutlist_dumps,
    cutlist_from_dict,
    validate_cutlist,
)
from .cutmerge import MergeConfig, generate_subtitles, merge, reframe, ClipArtifact
from .errors import ClipsmithError, ToolNotFound, ToolTimeout
from .fixtures import make_fixture
from .media import Transcoder, extract_audio, probe_video
from .metrics import MetricsConfig, batch_csv, build_report, summarize_reports
from .selection import build_prompt, heuristic_select, parse_selection, sanitize_cutlist
from .service.jobs import JobStore, STAGE_ORDER
from .transcribe import (
    backend_from_config,
    detect_pauses,
    dual_transcribe,
    merge_fragments,
    transcript_dumps,
    transcript_from_dict,
)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ToolNotFound, ToolTimeout) as exc:
            click.echo(f"transcoder error: {exc}", err=True)
            sys.exit(3)
        except ClipsmithError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _write_out(out: Optional[str], text: str) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _persona_options(fn):
    fn = click.option("--role", default=None, help="Selection role/style for the clip.")(fn)
    fn = click.option("--extra-requirements", default=None, help="Free-text extra requirements.")(fn)
    fn = click.option("--keywords", default=None, help="Comma-separated priority keywords.")(fn)
    fn = click.option("--max-duration", type=float, default=None, help="Clip budget in seconds.")(fn)
    return fn


def _persona_from(cfg: dict, role, extra_requirements, keywords, max_duration) -> Persona:
    defaults = cfg.get("persona", {})
    return Persona(
        role=role if role is not None else defaults.get("role", "general highlights editor"),
        extra_requirements=(
            extra_requirements if extra_requirements is not None
            else defaults.get("extra_requirements", "")
        ),
        keywords=(
            [k.strip() for k in keywords.split(",") if k.strip()] if keywords
            else list(defaults.get("keywords", []))
        ),
        max_duration=(
            max_duration if max_duration is not None
            else float(defaults.get("max_duration", 180.0))
        ),
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Config file (YAML); defaults to ./clipsmith.yaml if present.")
@click.option("--mock", is_flag=True, default=False,
              help="Offline mode: mock backends, deterministic ids and timestamps.")
@click.option("--transcoder", default=None, help="ffmpeg executable to use.")
@click.option("--probe-tool", default=None, help="ffprobe executable to use.")
@click.pass_context
def main(ctx, config_path, mock, transcoder, probe_tool):
    """Extractive highlight-clip pipeline."""
    overrides: dict = {}
    if mock:
        overrides["mock"] = True
        overrides["transcribe"] = {"fast": {"kind": "mock", "backend_id": "mock-fast"},
                                   "accurate": {"kind": "mock", "backend_id": "mock-accurate"}}
        overrides["select"] = {"backend": {"kind": "mock"}}
    if transcoder:
        overrides.setdefault("transcoder", {})["ffmpeg"] = transcoder
    if probe_tool:
        overrides.setdefault("transcoder", {})["ffprobe"] = probe_tool
    ctx.obj = load_config(config_path, overrides=overrides)


@main.command()
@click.argument("video", type=click.Path(exists=True))
@click.option("--out", default=None, help="Write probe JSON here.")
@click.pass_obj
@_handle_errors
def probe(cfg, video, out):
    """Probe a source video's container, duration, and streams."""
    tool = Transcoder.from_config(cfg)
    meta = probe_video(video, tool)
    doc = {
        "path": str(meta.path), "container": meta.container, "duration": meta.duration,
        "has_audio": meta.has_audio, "width": meta.width, "height": meta.height,
        "fps": meta.fps,
    }
    _write_out(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    click.echo(
        f"{meta.container} {meta.width}x{meta.height}@{meta.fps:g} "
        f"{meta.duration:.2f}s audio={'yes' if meta.has_audio else 'no'}"
    )


@main.command("extract-audio")
@click.argument("video", type=click.Path(exists=True))
@click.option("--out", required=True, help="Output audio path (.wav).")
@click.option("--format", "fmt", default="wav", type=click.Choice(["wav", "mp3", "m4a", "flac"]))
@click.pass_obj
@_handle_errors
def extract_audio_cmd(cfg, video, out, fmt):
    """Extract the audio track (primary strategy with sanitized-path fallback)."""
    tool = Transcoder.from_config(cfg)
    meta = probe_video(video, tool)
    artifact = extract_audio(meta, tool, out, out_format=fmt)
    click.echo(f"{artifact.path} ({artifact.duration:.2f}s, extractor={artifact.extractor_used})")


@main.command()
@click.argument("audio", type=click.Path(exists=True))
@click.option("--backend", "role", default="accurate", type=click.Choice(["fast", "accurate"]))
@click.option("--dual/--single", default=True,
              help="Dual flow cross-validates language between both backends.")
@click.option("--language", default=None, help="Force this language tag.")
@click.option("--merge-gaps/--no-merge-gaps", default=True,
              help="Join mid-sentence fragments after transcription.")
@click.option("--out", default=None, help="Write the transcript JSON here.")
@click.pass_obj
@_handle_errors
def transcribe(cfg, audio, role, dual, language, merge_gaps, out):
    """Transcribe an audio file to the timestamped transcript format."""
    with wave.open(str(audio), "rb") as wf:
        duration = wf.getnframes() / wf.getframerate()
    if dual:
        forwarded, _fast, verdict = dual_transcribe(
            audio,
            backend_from_config(cfg, "fast"),
            backend_from_config(cfg, "accurate"),
            source_duration=duration,
            forced_language=language,
        )
        click.echo(f"language: {verdict.status} ({verdict.chosen})")
    else:
        from .transcribe import transcribe as transcribe_op

        forwarded = transcribe_op(
            audio, backend_from_config(cfg, role),
            forced_language=language, source_duration=duration,
        )
    if merge_gaps:
        section = cfg.get("transcribe", {})
        forwarded = merge_fragments(
            forwarded,
            gap_threshold=float(section.get("gap_threshold", 0.3)),
            max_merged_duration=float(section.get("max_merged_duration", 30.0)),
        )
    text = transcript_dumps(forwarded)
    _write_out(out, text)
    if not out:
        click.echo(text, nl=False)
    else:
        click.echo(f"{len(forwarded.segments)} segments -> {out}")


@main.command()
@click.argument("transcript", type=click.Path(exists=True))
@click.option("--heuristic", "use_heuristic", is_flag=True, default=False,
              help="Deterministic scored-knapsack selector (no model call).")
@click.option("--backend", "use_backend", is_flag=True, default=False,
              help="Model-backed selection via the configured backend.")
@_persona_options
@click.option("--out", default=None, help="Write the cut-list JSON here.")
@click.pass_obj
@_handle_errors
def select(cfg, transcript, use_heuristic, use_backend, role, extra_requirements,
           keywords, max_duration, out):
    """Produce a cut-list from a transcript and persona."""
    persona = _persona_from(cfg, role, extra_requirements, keywords, max_duration)
    t = transcript_from_dict(json.loads(Path(transcript).read_text(encoding="utf-8")))
    if use_heuristic or not use_backend:
        pauses = detect_pauses(
            t, min_gap=float(cfg.get("transcribe", {}).get("pause_min_gap", 0.6))
        )
        cutlist = heuristic_select(t, persona, pauses,
                                   weights=cfg.get("select", {}).get("weights"))
    else:
        backend = llm_mod.backend_from_config(cfg)
        bundle = build_prompt(t, persona)
        response = llm_mod.request_selection(
            bundle, backend, transcript=t, source_duration=t.source_duration,
            retries=int(cfg.get("select", {}).get("retries", 3)),
            base_delay=float(cfg.get("select", {}).get("retry_base_delay", 0.2)),
        )
        if response.parsed is None:
            raise ClipsmithError("backend produced no parseable cut-list")
        cutlist = sanitize_cutlist(response.parsed, t.source_duration, persona, transcript=t)
    text = cutlist_dumps(cutlist)
    _write_out(out, text)
    if not out:
        click.echo(text, nl=False)
    else:
        click.echo(
            f"{len(cutlist.segments)} segments, {cutlist.total_duration:.2f}s -> {out}"
        )


def _merge_config_from(cfg: dict, fade, crf, preset, orientation, burn) -> MergeConfig:
    section = cfg.get("merge", {})
    return MergeConfig(
        fade_window=fade if fade is not None else float(section.get("fade_window", 0.5)),
        video_quality=crf if crf is not None else int(section.get("video_quality", 23)),
        encode_preset=preset or str(section.get("encode_preset", "fast")),
        audio_bitrate=int(section.get("audio_bitrate", 128)),
        orientation=orientation or str(section.get("orientation", "horizontal")),
        burn_subtitles=burn if burn is not None else bool(section.get("burn_subtitles", False)),
    )


@main.command("merge")
@click.argument("video", type=click.Path(exists=True))
@click.argument("cutlist", type=click.Path(exists=True))
@click.option("--workdir", required=True, help="Directory for clip_i, list.txt, final outputs.")
@click.option("--fade", type=float, default=None, help="Fade window seconds (default 0.5).")
@click.option("--crf", type=int, default=None, help="Encoder rate factor (default 23).")
@click.option("--preset", default=None, help="Encoder speed preset (default fast).")
@click.option("--orientation", type=click.Choice(["horizontal", "vertical"]), default=None)
@click.option("--out", default=None, help="Write the merge summary JSON here.")
@click.pass_obj
@_handle_errors
def merge_cmd(cfg, video, cutlist, workdir, fade, crf, preset, orientation, out):
    """Cut, fade, re-encode, and concatenate a cut-list into the final clip."""
    tool = Transcoder.from_config(cfg)
    meta = probe_video(video, tool)
    doc = json.loads(Path(cutlist).read_text(encoding="utf-8"))
    validated = validate_cutlist(
        cutlist_from_dict(doc), meta.duration, require_chronological=False
    )
    merge_cfg = _merge_config_from(cfg, fade, crf, preset, orientation, None)
    artifact = merge(meta, validated, merge_cfg, workdir, tool)
    if merge_cfg.orientation == "vertical":
        artifact = reframe(artifact, "vertical", tool)
    summary = {
        "clip": str(artifact.path),
        "duration": artifact.duration,
        "segments": [
            {"src": [s.start, s.end], "out": [d.start, d.end]} for s, d in artifact.segment_map
        ],
    }
    _write_out(out, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    click.echo(f"{artifact.path} ({artifact.duration:.2f}s, {len(artifact.segment_map)} segments)")


@main.command()
@click.argument("transcript", type=click.Path(exists=True))
@click.argument("cutlist", type=click.Path(exists=True))
@click.option("--out", required=True, help="Output .srt path.")
@click.pass_obj
@_handle_errors
def subs(cfg, transcript, cutlist, out):
    """Generate remapped SRT subtitles for a cut-list (no merge required:
    output times assume the cut-list's own playback order)."""
    t = transcript_from_dict(json.loads(Path(transcript).read_text(encoding="utf-8")))
    c = cutlist_from_dict(json.loads(Path(cutlist).read_text(encoding="utf-8")))
    duration = t.source_duration or max(s.range.end for s in c.segments)
    validated = validate_cutlist(c, duration, require_chronological=False)
    segment_map = []
    cursor = 0.0
    from .core import TimeRange, normalize_timestamp

    for seg in validated.segments:
        out_start = normalize_timestamp(cursor)
        out_end = normalize_timestamp(cursor + seg.range.duration)
        segment_map.append((seg.range, TimeRange(out_start, out_end)))
        cursor = out_end
    path = generate_subtitles(validated, t, segment_map, out)
    click.echo(f"{path}")


@main.command("reframe")
@click.argument("clip", type=click.Path(exists=True))
@click.option("--orientation", type=click.Choice(["horizontal", "vertical"]), required=True)
@click.option("--out", default=None, help="Output clip path.")
@click.pass_obj
@_handle_errors
def reframe_cmd(cfg, clip, orientation, out):
    """Reframe a clip for vertical playback (horizontal is the identity)."""
    tool = Transcoder.from_config(cfg)
    meta = probe_video(clip, tool)
    artifact = ClipArtifact(
        path=Path(clip), duration=meta.duration, segment_map=(), config_used=MergeConfig()
    )
    result = reframe(artifact, orientation, tool, out=out)
    click.echo(f"{result.path}")


@main.command("eval")
@click.argument("transcript", type=click.Path(exists=True), required=False)
@click.argument("cutlist", type=click.Path(exists=True), required=False)
@click.option("--tau", type=float, default=None, help="Coverage threshold (default 0.6).")
@click.option("--batch", default=None, type=click.Path(exists=True),
              help="Jobs root: evaluate every job directory and summarize.")
@click.option("--out", default=None, help="Write the report (JSON, or CSV in batch mode).")
@click.pass_obj
@_handle_errors
def eval_cmd(cfg, transcript, cutlist, tau, batch, out):
    """Compute coherence/informativeness/redundancy metrics."""
    tau_value = tau if tau is not None else float(cfg.get("metrics", {}).get("tau", 0.6))
    mcfg = MetricsConfig(tau=tau_value)
    if batch:
        reports = []
        for job_dir in sorted(Path(batch).iterdir()):
            manifest_path = job_dir / "manifest.json"
            if not manifest_path.exists():
                continue
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            t_rel = manifest.get("artifacts", {}).get("transcript")
            c_rel = manifest.get("artifacts", {}).get("cutlist")
            if not t_rel or not c_rel:
                continue
            t = transcript_from_dict(json.loads((job_dir / t_rel).read_text(encoding="utf-8")))
            c = cutlist_from_dict(json.loads((job_dir / c_rel).read_text(encoding="utf-8")))
            reports.append(build_report(t, c, mcfg))
        if not reports:
            raise ClipsmithError(f"no evaluable jobs under {batch}")
        _write_out(out, batch_csv(reports))
        click.echo(f"{len(reports)} jobs @ tau={tau_value}")
        for name, value in summarize_reports(reports).items():
            click.echo(f"  {name:24s} {value}")
        return
    if not transcript or not cutlist:
        raise click.UsageError("eval needs TRANSCRIPT and CUTLIST (or --batch ROOT)")
    t = transcript_from_dict(json.loads(Path(transcript).read_text(encoding="utf-8")))
    c = cutlist_from_dict(json.loads(Path(cutlist).read_text(encoding="utf-8")))
    report = build_report(t, c, mcfg)
    _write_out(out, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    for name, value in report.to_dict().items():
        click.echo(f"  {name:24s} {value}")


@main.command()
@click.argument("video", type=click.Path(exists=True))
@_persona_options
@click.option("--selector", type=click.Choice(["heuristic", "llm"]), default=None,
              help="Override the configured selection mode.")
@click.option("--workdir", default=None, help="Jobs root (default: ./clipsmith-jobs).")
@click.option("--out", default=None, help="Write the final job manifest JSON here.")
@click.pass_obj
@_handle_errors
def e2e(cfg, video, role, extra_requirements, keywords, max_duration, selector, workdir, out):
    """Run the full pipeline on one video: extract, transcribe, select, merge."""
    if selector:
        cfg = dict(cfg)
        cfg["select"] = {**cfg.get("select", {}), "mode": selector}
    persona = _persona_from(cfg, role, extra_requirements, keywords, max_duration)
    root = Path(workdir) if workdir else Path(cfg.get("service", {}).get("workdir", "clipsmith-jobs"))
    store = JobStore(root, cfg)
    manifest = store.create_job(source_path=video, persona=persona)
    click.echo(f"job {manifest.job_id}")
    for stage in STAGE_ORDER:
        manifest = store.advance(manifest.job_id, stage)
        click.echo(f"  {stage:14s} -> {manifest.state}")
        if manifest.state == "FAILED":
            raise ClipsmithError(f"stage {stage} failed: {manifest.error}")
    manifest_text = json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n"
    _write_out(out, manifest_text)
    job_dir = store.job_dir(manifest.job_id)
    click.echo(f"clip: {job_dir / manifest.artifacts['clip']} ({manifest.clip_duration:.2f}s)")
    if "metrics" in manifest.artifacts:
        metrics_doc = json.loads((job_dir / manifest.artifacts["metrics"]).read_text())
        click.echo(
            "metrics: coverage={coverage_coherence} adjacency={adjacency_coherence} "
            "informativeness={informativeness} redundancy={redundancy}".format(**metrics_doc)
        )


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--workdir", default=None, help="Jobs root directory.")
@click.pass_obj
@_handle_errors
def serve(cfg, host, port, workdir):
    """Run the review HTTP service."""
    import uvicorn

    from .service.app import create_app

    section = cfg.get("service", {})
    root = Path(workdir or section.get("workdir", "clipsmith-jobs"))
    store = JobStore(root, cfg)
    frontend_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(store, frontend_dist=frontend_dist)
    uvicorn.run(
        app,
        host=host or section.get("host", "127.0.0.1"),
        port=port or int(section.get("port", 8237)),
        log_level="info",
    )


@main.command("make-fixture")
@click.argument("out", type=click.Path())
@click.option("--duration", type=float, default=60.0)
@click.option("--width", type=int, default=320)
@click.option("--height", type=int, default=240)
@click.option("--fps", type=float, default=25.0)
@click.option("--tone-hz", type=float, default=440.0)
@click.option("--amplitude", type=float, default=0.8, help="0 gives silent (but present) audio.")
@click.option("--no-audio", is_flag=True, default=False, help="Omit the audio stream entirely.")
@_handle_errors
def make_fixture_cmd(out, duration, width, height, fps, tone_hz, amplitude, no_audio):
    """Generate a synthetic bars+tone test video."""
    path = make_fixture(
        out, duration=duration, width=width, height=height, fps=fps,
        tone_hz=tone_hz, amplitude=amplitude, with_audio=not no_audio,
    )
    click.echo(f"{path}")


if __name__ == "__main__":
    main()
