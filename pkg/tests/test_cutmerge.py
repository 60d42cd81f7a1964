"""Cut & merge behavior: fades, re-encode, concat, subtitles, reframing."""

import json
import math
import wave
from types import SimpleNamespace

import numpy as np
import pytest

from clipsmith.avformat import read_avi_info
from clipsmith.core import CutList, CutSegment, TimeRange, validate_cutlist
from clipsmith.cutmerge import (
    ClipArtifact,
    MergeConfig,
    concat_clips,
    effective_fade,
    generate_subtitles,
    merge,
    process_clip,
    reframe,
)
from clipsmith.errors import ConcatFailed, EmptyCutList, InvalidSegment
from clipsmith.media import extract_audio, probe_video
from clipsmith.transcribe import Transcript, TranscriptSegment


def cutlist_for(ranges, duration, reorder=False):
    segments = [CutSegment(range=TimeRange(s, e), text=f"seg {i}") for i, (s, e) in enumerate(ranges)]
    return validate_cutlist(
        CutList("v", "p", segments), duration, require_chronological=not reorder
    )


def segment_rms_profile(final_path, tool, tmp_path, out_range):
    """Decode merged audio and return (head, mid, tail) RMS for one output segment."""
    wav = tmp_path / "decoded.wav"
    meta = probe_video(final_path, tool)
    extract_audio(meta, tool, wav)
    with wave.open(str(wav)) as wf:
        rate = wf.getframerate()
        data = np.frombuffer(wf.readframes(wf.getnframes()), dtype="<i2").astype(float)
    lo = int(out_range.start * rate)
    hi = int(out_range.end * rate)
    seg = data[lo:hi]
    quarter = int(0.25 * rate)
    mid_lo = len(seg) // 2 - quarter
    rms = lambda x: float(np.sqrt(np.mean(x**2))) if len(x) else 0.0
    return rms(seg[:quarter]), rms(seg[mid_lo: mid_lo + 2 * quarter]), rms(seg[-quarter:])


class TestMergeConfig:
    def test_defaults(self):
        cfg = MergeConfig()
        assert cfg.fade_window == 0.50
        assert cfg.video_quality == 23
        assert cfg.encode_preset == "fast"
        assert cfg.audio_bitrate == 128

    def test_fade_window_bounds(self):
        with pytest.raises(ValueError):
            MergeConfig(fade_window=0.0)
        with pytest.raises(ValueError):
            MergeConfig(fade_window=1.5)

    def test_effective_fade_shrinks_for_short_segments(self):
        assert effective_fade(10.0, 0.5) == 0.5
        assert effective_fade(0.8, 0.5) == 0.4


class TestProcessClip:
    def test_produces_faded_reencoded_clip(self, fixture_short, tool, tmp_path):
        meta = probe_video(fixture_short, tool)
        out = process_clip(meta, TimeRange(2, 7), MergeConfig(), tmp_path / "c.avi", tool)
        info = read_avi_info(out)
        assert info.duration == pytest.approx(5.0, abs=0.05)
        params = json.loads(info.tags["ICMT"])
        assert params["reencoded"] is True
        assert params["crf"] == 23

    def test_inverted_range_rejected(self, fixture_short, tool, tmp_path):
        meta = probe_video(fixture_short, tool)
        bogus = SimpleNamespace(start=20.0, end=10.0)
        with pytest.raises(InvalidSegment):
            process_clip(meta, bogus, MergeConfig(), tmp_path / "c.avi", tool)

    def test_range_beyond_source_rejected(self, fixture_short, tool, tmp_path):
        meta = probe_video(fixture_short, tool)
        with pytest.raises(InvalidSegment):
            process_clip(meta, TimeRange(5, 20), MergeConfig(), tmp_path / "c.avi", tool)


class TestConcat:
    def test_three_clips_sum_duration(self, fixture_short, tool, tmp_path):
        meta = probe_video(fixture_short, tool)
        clips = []
        for i, (s, e) in enumerate([(0, 3), (4, 7), (8, 11)]):
            clips.append(
                process_clip(meta, TimeRange(s, e), MergeConfig(), tmp_path / f"c{i}.avi", tool)
            )
        out = concat_clips(clips, tmp_path / "joined.avi", tool)
        assert probe_video(out, tool).duration == pytest.approx(9.0, abs=0.3)

    def test_empty_list(self, tool, tmp_path):
        with pytest.raises(EmptyCutList):
            concat_clips([], tmp_path / "x.avi", tool)

    def test_single_clip_identity(self, fixture_short, tool, tmp_path):
        meta = probe_video(fixture_short, tool)
        clip = process_clip(meta, TimeRange(1, 4), MergeConfig(), tmp_path / "c.avi", tool)
        out = concat_clips([clip], tmp_path / "one.avi", tool)
        # stream copy of one clip: identical decoded payloads
        from clipsmith.avformat import AviReader

        with AviReader(clip) as a, AviReader(out) as b:
            assert list(a.iter_frames()) == list(b.iter_frames())
            assert a.read_audio() == b.read_audio()

    def test_mismatched_inputs_fail(self, fixture_short, tool, tmp_path):
        meta = probe_video(fixture_short, tool)
        a = process_clip(meta, TimeRange(0, 2), MergeConfig(), tmp_path / "a.avi", tool)
        from clipsmith.media import run_transcoder

        b = tmp_path / "b.avi"
        run_transcoder(tool, ["-y", "-ss", "0", "-to", "2", "-i", str(fixture_short),
                              "-vf", "scale=160:120", str(b)])
        with pytest.raises(ConcatFailed):
            concat_clips([a, b], tmp_path / "out.avi", tool)


class TestMerge:
    def test_two_segments_map(self, fixture_60s, tool, tmp_path):
        meta = probe_video(fixture_60s, tool)
        validated = cutlist_for([(10, 15), (30, 40)], 60)
        artifact = merge(meta, validated, MergeConfig(), tmp_path / "work", tool)
        assert artifact.duration == pytest.approx(15.0, abs=0.6)
        assert artifact.segment_map == (
            (TimeRange(10, 15), TimeRange(0, 5)),
            (TimeRange(30, 40), TimeRange(5, 15)),
        )
        workdir = tmp_path / "work"
        assert (workdir / "clip_1.avi").exists()
        assert (workdir / "clip_2.avi").exists()
        assert (workdir / "list.txt").exists()
        assert artifact.path == workdir / "final.avi"

    def test_user_order_preserved(self, fixture_60s, tool, tmp_path):
        meta = probe_video(fixture_60s, tool)
        validated = cutlist_for([(30, 40), (10, 15)], 60, reorder=True)
        artifact = merge(meta, validated, MergeConfig(), tmp_path / "work", tool)
        # output order follows the list: the 10 s segment plays second
        assert artifact.segment_map[0][0] == TimeRange(30, 40)
        assert artifact.segment_map[1][1] == TimeRange(10, 15)

    def test_subsecond_segment_shrinks_fades(self, fixture_60s, tool, tmp_path):
        meta = probe_video(fixture_60s, tool)
        validated = cutlist_for([(58.5, 59.2)], 60)
        artifact = merge(meta, validated, MergeConfig(), tmp_path / "work", tool)
        assert artifact.duration == pytest.approx(0.7, abs=0.15)

    def test_fade_attenuation_per_segment(self, fixture_60s, tool, tmp_path):
        meta = probe_video(fixture_60s, tool)
        validated = cutlist_for([(5, 11), (20, 27)], 60)
        artifact = merge(meta, validated, MergeConfig(), tmp_path / "work", tool)
        for _src, out_range in artifact.segment_map:
            head, mid, tail = segment_rms_profile(artifact.path, tool, tmp_path, out_range)
            assert 20 * math.log10(head / mid) <= -6.0
            assert 20 * math.log10(tail / mid) <= -6.0


class TestSubtitles:
    transcript = Transcript(
        segments=[
            TranscriptSegment(0, TimeRange(12, 14), "hello"),
            TranscriptSegment(1, TimeRange(9, 12), "straddler"),
            TranscriptSegment(2, TimeRange(40, 42), "outside"),
        ],
        backend_id="t",
        source_duration=60.0,
    )

    def test_offset_and_clipping(self, tmp_path):
        validated = cutlist_for([(10, 20)], 60)
        segment_map = [(TimeRange(10, 20), TimeRange(0, 10))]
        out = generate_subtitles(validated, self.transcript, segment_map, tmp_path / "s.srt")
        text = out.read_text()
        blocks = [b for b in text.split("\n\n") if b.strip()]
        assert len(blocks) == 2  # "outside" omitted
        assert "00:00:02,000 --> 00:00:04,000" in text   # hello: 12-14 -> 2-4
        assert "00:00:00,000 --> 00:00:02,000" in text   # straddler clipped to 10-12 -> 0-2
        assert "outside" not in text

    def test_empty_transcript_gives_empty_file(self, tmp_path):
        validated = cutlist_for([(10, 20)], 60)
        empty = Transcript(segments=[], backend_id="t", source_duration=60.0)
        out = generate_subtitles(validated, empty, [(TimeRange(10, 20), TimeRange(0, 10))],
                                 tmp_path / "e.srt")
        assert out.read_text() == ""

    def test_millisecond_rounding(self, tmp_path):
        t = Transcript(
            segments=[TranscriptSegment(0, TimeRange(10.01, 11.99), "x")],
            backend_id="t", source_duration=60.0,
        )
        validated = cutlist_for([(10, 20)], 60)
        out = generate_subtitles(validated, t, [(TimeRange(10, 20), TimeRange(0, 10))],
                                 tmp_path / "ms.srt")
        assert "00:00:00,010 --> 00:00:01,990" in out.read_text()


class TestReframe:
    def test_horizontal_identity(self, fixture_short, tool):
        artifact = ClipArtifact(path=fixture_short, duration=12.0, segment_map=(),
                                config_used=MergeConfig())
        assert reframe(artifact, "horizontal", tool) is artifact

    def test_vertical_from_landscape(self, tool, tmp_path):
        from clipsmith.fixtures import make_fixture

        wide = make_fixture(tmp_path / "wide.avi", duration=2.0, width=320, height=240)
        artifact = ClipArtifact(path=wide, duration=2.0, segment_map=(),
                                config_used=MergeConfig())
        out = reframe(artifact, "vertical", tool, out=tmp_path / "v.avi")
        meta = probe_video(out.path, tool)
        assert (meta.width, meta.height) == (1080, 1920)

    def test_vertical_from_portrait_pads(self, tool, tmp_path):
        from clipsmith.fixtures import make_fixture

        tall = make_fixture(tmp_path / "tall.avi", duration=2.0, width=120, height=240)
        artifact = ClipArtifact(path=tall, duration=2.0, segment_map=(),
                                config_used=MergeConfig())
        out = reframe(artifact, "vertical", tool, out=tmp_path / "v.avi")
        meta = probe_video(out.path, tool)
        assert (meta.width, meta.height) == (1080, 1920)
