"""HTTP surface over the job store.

Endpoints: POST /jobs (multipart upload or local path + persona fields),
POST /jobs/{id}/advance?stage=…, PATCH /jobs/{id}/cutlist,
GET /jobs/{id}, GET /jobs/{id}/artifacts/{kind}, GET /jobs/{id}/metrics.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from fastapi import Body, FastAPI, Form, HTTPException, Query, UploadFile
from fastapi.responses import FileResponse, JSONResponse

from ..core import Persona
from ..errors import (
    ArtifactNotFound,
    ArtifactNotReady,
    ClipsmithError,
    EditRejected,
    InvalidTransition,
    JobCreateFailed,
    UnsupportedFormat,
)
from .jobs import JobStore

_MEDIA_TYPES = {
    ".avi": "video/x-msvideo",
    ".mp4": "video/mp4",
    ".m4v": "video/x-m4v",
    ".mov": "video/quicktime",
    ".webm": "video/webm",
    ".wav": "audio/wav",
    ".mp3": "audio/mpeg",
    ".srt": "application/x-subrip",
    ".json": "application/json",
    ".txt": "text/plain",
}


def _persona_from_fields(
    role: Optional[str],
    extra_requirements: Optional[str],
    keywords: Optional[str],
    max_duration: Optional[float],
    defaults: dict[str, Any],
) -> Persona:
    return Persona(
        role=role if role is not None else defaults.get("role", "general highlights editor"),
        extra_requirements=(
            extra_requirements
            if extra_requirements is not None
            else defaults.get("extra_requirements", "")
        ),
        keywords=(
            [k.strip() for k in keywords.split(",") if k.strip()]
            if keywords
            else list(defaults.get("keywords", []))
        ),
        max_duration=(
            float(max_duration) if max_duration is not None
            else float(defaults.get("max_duration", 180.0))
        ),
    )


def create_app(store: JobStore, frontend_dist: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="clipsmith service")

    @app.get("/health")
    def health() -> JSONResponse:
        return JSONResponse({"ok": True, "jobs": len(store.list_jobs())})

    @app.get("/jobs")
    def list_jobs() -> JSONResponse:
        return JSONResponse({"jobs": store.list_jobs()})

    @app.post("/jobs")
    async def create_job(
        file: Optional[UploadFile] = None,
        source_path: Optional[str] = Form(default=None),
        role: Optional[str] = Form(default=None),
        extra_requirements: Optional[str] = Form(default=None),
        keywords: Optional[str] = Form(default=None),
        max_duration: Optional[float] = Form(default=None),
    ) -> JSONResponse:
        persona = _persona_from_fields(
            role, extra_requirements, keywords, max_duration,
            store.cfg.get("persona", {}),
        )
        try:
            if file is not None:
                payload = await file.read()
                manifest = store.create_job(
                    upload=payload, filename=file.filename, persona=persona
                )
            elif source_path:
                manifest = store.create_job(source_path=source_path, persona=persona)
            else:
                raise HTTPException(status_code=400, detail="file or source_path required")
        except UnsupportedFormat as exc:
            raise HTTPException(status_code=415, detail=str(exc))
        except JobCreateFailed as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return JSONResponse(manifest.to_dict(), status_code=201)

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str) -> JSONResponse:
        try:
            return JSONResponse(store.get(job_id).to_dict())
        except ArtifactNotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/jobs/{job_id}/advance")
    def advance(job_id: str, stage: str = Query(...)) -> JSONResponse:
        try:
            manifest = store.advance(job_id, stage)
        except ArtifactNotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except InvalidTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        # stage failures are part of the state machine: 200 with state=FAILED
        return JSONResponse(manifest.to_dict())

    @app.patch("/jobs/{job_id}/cutlist")
    def patch_cutlist(job_id: str, body: dict[str, Any] = Body(...)) -> JSONResponse:
        edits = body.get("edits")
        if not isinstance(edits, list) or not edits:
            raise HTTPException(status_code=422, detail="body needs a non-empty edits array")
        try:
            manifest = store.patch_cutlist(job_id, edits)
        except ArtifactNotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (EditRejected, ArtifactNotReady) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return JSONResponse(manifest.to_dict())

    @app.get("/jobs/{job_id}/artifacts/{kind}")
    def get_artifact(job_id: str, kind: str):
        try:
            path = store.artifact_path(job_id, kind)
        except ArtifactNotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ArtifactNotReady as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        media_type = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media_type, filename=path.name)

    @app.get("/jobs/{job_id}/cutlist")
    def get_cutlist(job_id: str) -> JSONResponse:
        try:
            path = store.artifact_path(job_id, "cutlist")
        except ArtifactNotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ArtifactNotReady as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return JSONResponse(json.loads(path.read_text(encoding="utf-8")))

    @app.get("/jobs/{job_id}/metrics")
    def get_metrics(job_id: str, tau: Optional[float] = Query(default=None)) -> JSONResponse:
        try:
            return JSONResponse(store.metrics_report(job_id, tau=tau))
        except ArtifactNotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (ArtifactNotReady, ClipsmithError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    if frontend_dist and frontend_dist.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dist), html=True), name="ui")

    return app
