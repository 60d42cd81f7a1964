"""CLI surface: stage commands compose via files; exit codes by error family."""

import json

import pytest
from click.testing import CliRunner

from clipsmith.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


class TestStageCommands:
    def test_probe(self, runner, fixture_short, tmp_path):
        out = tmp_path / "meta.json"
        result = runner.invoke(main, ["--mock", "probe", str(fixture_short), "--out", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert doc["duration"] == 12.0
        assert "MSVideo" in result.output

    def test_stagewise_pipeline_compose(self, runner, fixture_short, tmp_path):
        audio = tmp_path / "a.wav"
        transcript = tmp_path / "t.json"
        cutlist = tmp_path / "c.json"
        report = tmp_path / "r.json"
        srt = tmp_path / "s.srt"

        for args in (
            ["--mock", "extract-audio", str(fixture_short), "--out", str(audio)],
            ["--mock", "transcribe", str(audio), "--out", str(transcript)],
            ["--mock", "select", str(transcript), "--heuristic",
             "--max-duration", "8", "--out", str(cutlist)],
            ["--mock", "eval", str(transcript), str(cutlist), "--tau", "0.6",
             "--out", str(report)],
            ["--mock", "subs", str(transcript), str(cutlist), "--out", str(srt)],
        ):
            result = runner.invoke(main, args)
            assert result.exit_code == 0, f"{args}: {result.output}"

        cl = json.loads(cutlist.read_text())
        assert cl["select_segments"]
        assert cl["total_duration"] <= 8.0 * 1.1 + 1e-6
        rep = json.loads(report.read_text())
        assert rep["tau"] == 0.6
        assert 0.0 <= rep["coverage_coherence"] <= 1.0

    def test_merge_command(self, runner, fixture_short, tmp_path):
        cutlist = tmp_path / "c.json"
        cutlist.write_text(json.dumps({
            "video_id": "v", "persona_id": "p",
            "select_segments": [
                {"start": 1.0, "end": 4.0, "text": "a"},
                {"start": 6.0, "end": 9.0, "text": "b"},
            ],
        }))
        summary = tmp_path / "m.json"
        result = runner.invoke(main, [
            "--mock", "merge", str(fixture_short), str(cutlist),
            "--workdir", str(tmp_path / "work"), "--out", str(summary),
        ])
        assert result.exit_code == 0, result.output
        doc = json.loads(summary.read_text())
        assert doc["duration"] == pytest.approx(6.0, abs=0.3)

    def test_make_fixture(self, runner, tmp_path):
        out = tmp_path / "f.avi"
        result = runner.invoke(main, ["make-fixture", str(out), "--duration", "2"])
        assert result.exit_code == 0
        assert out.exists()


class TestExitCodes:
    def test_usage_error_is_2(self, runner):
        result = runner.invoke(main, ["select"])  # missing required argument
        assert result.exit_code == 2

    def test_pipeline_error_is_1(self, runner, tmp_path):
        empty = tmp_path / "empty.avi"
        empty.write_bytes(b"")
        result = runner.invoke(main, ["--mock", "probe", str(empty)])
        assert result.exit_code == 1
        assert "error" in result.output.lower() or result.exception

    def test_tool_error_is_3(self, runner, fixture_short):
        result = runner.invoke(main, [
            "--transcoder", "/no/such/ffmpeg", "--probe-tool", "/no/such/ffprobe",
            "probe", str(fixture_short),
        ])
        assert result.exit_code == 3


class TestEndToEnd:
    def test_e2e_mock(self, runner, fixture_short, tmp_path):
        out = tmp_path / "manifest.json"
        result = runner.invoke(main, [
            "--mock", "e2e", str(fixture_short),
            "--role", "marketing", "--max-duration", "8",
            "--workdir", str(tmp_path / "jobs"), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        manifest = json.loads(out.read_text())
        assert manifest["state"] == "MERGED"
        assert manifest["clip_duration"] > 0

    def test_eval_batch_over_jobs(self, runner, fixture_short, tmp_path):
        for i in range(2):
            runner.invoke(main, [
                "--mock", "e2e", str(fixture_short), "--max-duration", str(8 + i),
                "--workdir", str(tmp_path / "jobs"),
            ])
        out = tmp_path / "batch.csv"
        result = runner.invoke(main, ["eval", "--batch", str(tmp_path / "jobs"),
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "±" in result.output
        assert out.read_text().startswith("job,")
