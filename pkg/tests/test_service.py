"""Job service: state machine, persistence, editing, HTTP surface."""

import json
import threading

import pytest
from fastapi.testclient import TestClient

from clipsmith.config import load_config
from clipsmith.errors import EditRejected, InvalidTransition, UnsupportedFormat
from clipsmith.service.app import create_app
from clipsmith.service.jobs import STAGE_ORDER, JobStore


@pytest.fixture()
def cfg():
    return load_config(path="/nonexistent.yaml", overrides={"mock": True})


@pytest.fixture()
def store(cfg, tmp_path):
    return JobStore(tmp_path / "jobs", cfg)


@pytest.fixture()
def client(store):
    return TestClient(create_app(store))


def advance_to(store, job_id, target_stage):
    for stage in STAGE_ORDER:
        manifest = store.advance(job_id, stage)
        assert manifest.state != "FAILED", manifest.error
        if stage == target_stage:
            return manifest
    return manifest


class TestJobStore:
    def test_create_from_path(self, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        assert manifest.state == "CREATED"
        assert (store.job_dir(manifest.job_id) / "manifest.json").exists()
        assert (store.job_dir(manifest.job_id) / manifest.artifacts["video"]).exists()

    def test_unsupported_extension_creates_nothing(self, store, tmp_path):
        bad = tmp_path / "document.xyz"
        bad.write_bytes(b"payload")
        before = set(store.list_jobs())
        with pytest.raises(UnsupportedFormat):
            store.create_job(source_path=bad)
        assert set(store.list_jobs()) == before

    def test_duplicate_upload_gets_new_job(self, cfg, tmp_path, fixture_short):
        # independent ids per submission outside deterministic mock mode
        live_cfg = dict(cfg)
        live_cfg["mock"] = False
        store = JobStore(tmp_path / "jobs2", live_cfg)
        a = store.create_job(source_path=fixture_short)
        b = store.create_job(source_path=fixture_short)
        assert a.job_id != b.job_id

    def test_full_chain_with_mocks(self, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        manifest = advance_to(store, manifest.job_id, "merge")
        assert manifest.state == "MERGED"
        for kind in ("video", "audio", "transcript", "cutlist", "clip", "subtitles", "metrics"):
            assert store.artifact_path(manifest.job_id, kind).exists(), kind
        assert manifest.clip_duration and manifest.clip_duration > 0

    def test_stage_skip_rejected(self, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        with pytest.raises(InvalidTransition):
            store.advance(manifest.job_id, "transcribe")

    def test_unknown_stage_rejected(self, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        with pytest.raises(InvalidTransition):
            store.advance(manifest.job_id, "explode")

    def test_failed_stage_records_diagnostic_and_allows_retry(self, store, fixture_short, monkeypatch):
        manifest = store.create_job(source_path=fixture_short)
        advance_to(store, manifest.job_id, "transcribe")

        from clipsmith.errors import EmptySelection
        import clipsmith.service.jobs as jobs_mod

        def boom(*args, **kwargs):
            raise EmptySelection("forced failure for the test")

        monkeypatch.setattr(jobs_mod, "heuristic_select", boom)
        manifest = store.advance(manifest.job_id, "select")
        assert manifest.state == "FAILED"
        assert "forced failure" in manifest.error
        assert manifest.failed_from == "TRANSCRIBED"
        with pytest.raises(InvalidTransition):
            store.advance(manifest.job_id, "merge")

        monkeypatch.undo()
        manifest = store.advance(manifest.job_id, "select")
        assert manifest.state == "SELECTED"
        assert manifest.error is None

    def test_crash_safety_reload_from_disk(self, cfg, tmp_path, fixture_short):
        root = tmp_path / "jobs"
        store = JobStore(root, cfg)
        manifest = store.create_job(source_path=fixture_short)
        advance_to(store, manifest.job_id, "select")

        reborn = JobStore(root, cfg)  # fresh instance: disk is the only state
        reloaded = reborn.get(manifest.job_id)
        assert reloaded.state == "SELECTED"
        merged = reborn.advance(manifest.job_id, "merge")
        assert merged.state == "MERGED"

    def test_concurrent_advance_single_winner(self, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        results = []

        def attempt():
            try:
                results.append(store.advance(manifest.job_id, "extract_audio").state)
            except InvalidTransition:
                results.append("rejected")

        threads = [threading.Thread(target=attempt) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == ["AUDIO_EXTRACTED", "rejected"]

    def test_voiceover_free_routes_to_visual(self, store, fixture_noaudio):
        manifest = store.create_job(source_path=fixture_noaudio)
        manifest = advance_to(store, manifest.job_id, "select")
        assert manifest.voiceover_free is True
        assert manifest.state == "SELECTED"
        cutlist = json.loads(
            store.artifact_path(manifest.job_id, "cutlist").read_text()
        )
        assert cutlist["select_segments"]
        # raw exchange persisted for audit
        assert store.artifact_path(manifest.job_id, "llm_response").exists()

    def test_llm_mode_persists_raw_exchange(self, cfg, tmp_path, fixture_short):
        llm_cfg = json.loads(json.dumps(cfg))
        llm_cfg["select"]["mode"] = "llm"
        store = JobStore(tmp_path / "jobs-llm", llm_cfg)
        manifest = store.create_job(source_path=fixture_short)
        manifest = advance_to(store, manifest.job_id, "select")
        assert manifest.state == "SELECTED"
        raw = store.artifact_path(manifest.job_id, "llm_response").read_text()
        assert "select_segments" in raw


class TestPatchCutlist:
    @pytest.fixture()
    def selected(self, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        return advance_to(store, manifest.job_id, "select")

    def load_cutlist(self, store, job_id):
        return json.loads(store.artifact_path(job_id, "cutlist").read_text())

    def test_remove_segment(self, store, selected):
        before = self.load_cutlist(store, selected.job_id)
        n = len(before["select_segments"])
        manifest = store.patch_cutlist(selected.job_id, [{"op": "remove", "index": 0}])
        after = self.load_cutlist(store, selected.job_id)
        assert len(after["select_segments"]) == n - 1
        assert manifest.cutlist_version == selected.cutlist_version + 1
        assert after["total_duration"] < before["total_duration"]

    def test_versions_retained(self, store, selected):
        store.patch_cutlist(selected.job_id, [{"op": "remove", "index": 0}])
        job_dir = store.job_dir(selected.job_id)
        assert (job_dir / "cutlist_v1.json").exists()
        assert (job_dir / "cutlist_v2.json").exists()

    def test_adjust_clamps_to_source(self, store, selected):
        manifest = store.patch_cutlist(
            selected.job_id,
            [{"op": "adjust", "index": 0, "delta_start": -500.0}],
        )
        doc = self.load_cutlist(store, manifest.job_id)
        assert doc["select_segments"][0]["start"] == 0.0

    def test_reorder_persists_playback_order(self, store, selected):
        doc = self.load_cutlist(store, selected.job_id)
        n = len(doc["select_segments"])
        if n < 2:
            pytest.skip("needs at least two segments")
        order = list(range(n))[::-1]
        store.patch_cutlist(selected.job_id, [{"op": "reorder", "order": order}])
        after = self.load_cutlist(store, selected.job_id)
        starts = [s["start"] for s in after["select_segments"]]
        assert starts == sorted(starts, reverse=True)

    def test_bad_index_rejected(self, store, selected):
        with pytest.raises(EditRejected):
            store.patch_cutlist(selected.job_id, [{"op": "remove", "index": 99}])

    def test_removing_everything_rejected(self, store, selected):
        doc = self.load_cutlist(store, selected.job_id)
        edits = [{"op": "remove", "index": 0} for _ in doc["select_segments"]]
        with pytest.raises(EditRejected):
            store.patch_cutlist(selected.job_id, edits)

    def test_patch_before_selected_rejected(self, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        with pytest.raises(EditRejected):
            store.patch_cutlist(manifest.job_id, [{"op": "remove", "index": 0}])

    def test_patch_after_merge_resets_state(self, store, selected):
        manifest = store.advance(selected.job_id, "merge")
        assert manifest.state == "MERGED"
        manifest = store.patch_cutlist(selected.job_id, [{"op": "remove", "index": 0}])
        assert manifest.state == "SELECTED"
        assert manifest.clip_duration is None
        manifest = store.advance(selected.job_id, "merge")
        assert manifest.state == "MERGED"


class TestHttpApi:
    def test_health(self, client):
        assert client.get("/health").json()["ok"] is True

    def test_create_upload_and_full_flow(self, client, fixture_short):
        with open(fixture_short, "rb") as fh:
            response = client.post(
                "/jobs",
                files={"file": ("clip.avi", fh, "video/x-msvideo")},
                data={"role": "marketing editor", "max_duration": "20"},
            )
        assert response.status_code == 201
        job_id = response.json()["job_id"]
        assert response.json()["persona"]["role"] == "marketing editor"

        for stage in STAGE_ORDER:
            response = client.post(f"/jobs/{job_id}/advance", params={"stage": stage})
            assert response.status_code == 200
            assert response.json()["state"] != "FAILED"
        assert response.json()["state"] == "MERGED"

        clip = client.get(f"/jobs/{job_id}/artifacts/clip")
        assert clip.status_code == 200
        assert clip.headers["content-type"].startswith("video/")

        metrics = client.get(f"/jobs/{job_id}/metrics", params={"tau": 0.5})
        assert metrics.status_code == 200
        assert metrics.json()["tau"] == 0.5

    def test_unsupported_upload_415(self, client):
        response = client.post("/jobs", files={"file": ("nope.xyz", b"bytes", "application/octet-stream")})
        assert response.status_code == 415

    def test_missing_job_404(self, client):
        assert client.get("/jobs/job-missing").status_code == 404

    def test_invalid_transition_409(self, client, fixture_short):
        response = client.post("/jobs", data={"source_path": str(fixture_short)})
        job_id = response.json()["job_id"]
        response = client.post(f"/jobs/{job_id}/advance", params={"stage": "merge"})
        assert response.status_code == 409

    def test_artifact_not_ready_409(self, client, fixture_short):
        response = client.post("/jobs", data={"source_path": str(fixture_short)})
        job_id = response.json()["job_id"]
        response = client.get(f"/jobs/{job_id}/artifacts/clip")
        assert response.status_code == 409

    def test_patch_endpoint(self, client, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        advance_to(store, manifest.job_id, "select")
        response = client.patch(
            f"/jobs/{manifest.job_id}/cutlist",
            json={"edits": [{"op": "remove", "index": 0}]},
        )
        assert response.status_code == 200
        assert response.json()["cutlist_version"] == 2
        # server-side sanitation is authoritative: returned doc equals disk
        served = client.get(f"/jobs/{manifest.job_id}/cutlist").json()
        on_disk = json.loads(store.artifact_path(manifest.job_id, "cutlist").read_text())
        assert served == on_disk

    def test_patch_bad_edit_422(self, client, store, fixture_short):
        manifest = store.create_job(source_path=fixture_short)
        advance_to(store, manifest.job_id, "select")
        response = client.patch(
            f"/jobs/{manifest.job_id}/cutlist",
            json={"edits": [{"op": "remove", "index": 42}]},
        )
        assert response.status_code == 422
