import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clipsmith.core import (
    CutList,
    CutSegment,
    Persona,
    TimeRange,
    cutlist_dumps,
    cutlist_from_dict,
    cutlist_to_dict,
    normalize_timestamp,
    parse_time_to_seconds,
    render_timestamp,
    validate_cutlist,
)
from clipsmith.errors import (
    CutListInvalid,
    EmptyCutList,
    InvalidTimeRange,
    InvalidTimestamp,
    TimeParseError,
)


def seg(start, end, text="x"):
    return CutSegment(range=TimeRange(start, end), text=text)


class TestNormalizeTimestamp:
    def test_half_away_from_zero(self):
        assert normalize_timestamp(12.345) == 12.35
        assert normalize_timestamp(12.344) == 12.34
        assert normalize_timestamp(0) == 0.00
        # 0.125 is exactly representable; half rounds away from zero
        assert normalize_timestamp(0.125) == 0.13
        assert normalize_timestamp(2.675) == 2.68

    def test_idempotent(self):
        for value in (0.0, 1.005, 12.345, 99.994999, 3599.999):
            once = normalize_timestamp(value)
            assert normalize_timestamp(once) == once

    def test_rejects_bad_input(self):
        with pytest.raises(InvalidTimestamp):
            normalize_timestamp(-0.01)
        with pytest.raises(InvalidTimestamp):
            normalize_timestamp(float("nan"))
        with pytest.raises(InvalidTimestamp):
            normalize_timestamp(float("inf"))
        with pytest.raises(InvalidTimestamp):
            normalize_timestamp("12")  # type: ignore[arg-type]

    def test_render_two_digits(self):
        assert render_timestamp(normalize_timestamp(5)) == "5.00"
        assert render_timestamp(normalize_timestamp(12.5)) == "12.50"
        assert render_timestamp(normalize_timestamp(125.456)) == "125.46"

    @given(st.floats(min_value=0, max_value=1e7, allow_nan=False, allow_infinity=False))
    @settings(max_examples=300)
    def test_properties(self, value):
        out = normalize_timestamp(value)
        assert abs(out - value) < 0.005 + 1e-9
        assert normalize_timestamp(out) == out
        rendered = render_timestamp(out)
        assert len(rendered.split(".")[1]) == 2
        assert parse_time_to_seconds(rendered) == out


class TestParseTime:
    def test_clock_forms(self):
        assert parse_time_to_seconds("00:02:05.5") == 125.50
        assert parse_time_to_seconds("01:00:00") == 3600.00
        assert parse_time_to_seconds("2:05") == 125.00
        assert parse_time_to_seconds("0:59.25") == 59.25

    def test_decimal_literal(self):
        assert parse_time_to_seconds("125.456") == 125.46
        assert parse_time_to_seconds(" 12 ") == 12.00

    @pytest.mark.parametrize("raw", ["", "abc", "1:99", "-5", "12:", "1:2:3:4", "N/A"])
    def test_unparseable(self, raw):
        with pytest.raises(TimeParseError) as exc_info:
            parse_time_to_seconds(raw)
        assert exc_info.value.raw == raw


class TestTimeRange:
    def test_normalizes_and_duration(self):
        r = TimeRange(1.005, 2.344)
        assert (r.start, r.end) == (1.01, 2.34)
        assert r.duration == 1.33

    def test_rejects_empty_or_inverted(self):
        with pytest.raises(InvalidTimeRange):
            TimeRange(2.0, 2.0)
        with pytest.raises(InvalidTimeRange):
            TimeRange(20.0, 10.0)

    def test_half_open_adjacency(self):
        a, b = TimeRange(0, 5), TimeRange(5, 10)
        assert not a.overlaps(b)
        assert a.intersect(b) is None
        assert TimeRange(0, 6).overlaps(b)

    def test_intersect(self):
        assert TimeRange(0, 6).intersect(TimeRange(5, 10)) == TimeRange(5, 6)


class TestValidateCutList:
    def test_valid(self):
        c = CutList("v", "p", [seg(10, 20), seg(30, 40)])
        validated = validate_cutlist(c, 60)
        assert validated.total_duration == 20.00

    def test_overlap_reports_index(self):
        c = CutList("v", "p", [seg(10, 20), seg(15, 25)])
        with pytest.raises(CutListInvalid) as exc_info:
            validate_cutlist(c, 60)
        assert exc_info.value.index == 1

    def test_out_of_range(self):
        with pytest.raises(CutListInvalid):
            validate_cutlist(CutList("v", "p", [seg(50, 70)]), 60)

    def test_empty(self):
        with pytest.raises(EmptyCutList):
            validate_cutlist(CutList("v", "p", []), 60)

    def test_order_violation(self):
        c = CutList("v", "p", [seg(30, 40), seg(10, 15)])
        with pytest.raises(CutListInvalid):
            validate_cutlist(c, 60)
        # an explicit playback reorder is allowed when requested
        validated = validate_cutlist(c, 60, require_chronological=False)
        assert [s.range.start for s in validated.segments] == [30.0, 10.0]

    def test_adjacent_ranges_are_valid(self):
        c = CutList("v", "p", [seg(0, 5), seg(5, 10)])
        assert validate_cutlist(c, 10).total_duration == 10.0

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=50, allow_nan=False),
                st.floats(min_value=0.01, max_value=10, allow_nan=False),
            ),
            min_size=1,
            max_size=8,
        )
    )
    @settings(max_examples=200)
    def test_accepts_iff_invariants_hold(self, raw):
        segments = []
        for start, length in raw:
            start = normalize_timestamp(start)
            end = normalize_timestamp(start + max(0.01, length))
            if end <= start or end > 60:
                return  # constructible inputs only
            segments.append(seg(start, end))
        c = CutList("v", "p", segments)

        sorted_ok = all(
            segments[i].range.start >= segments[i - 1].range.start
            for i in range(1, len(segments))
        )
        by_start = sorted(segments, key=lambda s: s.range.start)
        overlap_free = all(
            by_start[i].range.start >= by_start[i - 1].range.end
            for i in range(1, len(by_start))
        )
        should_pass = sorted_ok and overlap_free
        if should_pass:
            validate_cutlist(c, 60)
        else:
            with pytest.raises(CutListInvalid):
                validate_cutlist(c, 60)


class TestSerialization:
    def test_wire_format_round_trip(self):
        c = CutList(
            "vid",
            "per",
            [
                CutSegment(TimeRange(12.5, 25.3), "We begin ...", reason="intro", score=0.9),
                CutSegment(TimeRange(30, 40), "then more"),
            ],
        )
        doc = cutlist_to_dict(c)
        assert "select_segments" in doc
        first = doc["select_segments"][0]
        assert first == {
            "start": 12.50, "end": 25.30, "text": "We begin ...",
            "reason": "intro", "score": 0.9,
        }
        back = cutlist_from_dict(doc)
        assert back.segments == c.segments
        assert back.total_duration == c.total_duration

    def test_dumps_deterministic(self):
        c = CutList("v", "p", [seg(1, 2, "a")])
        assert cutlist_dumps(c) == cutlist_dumps(c)
        assert json.loads(cutlist_dumps(c))["total_duration"] == 1.0

    def test_persona_requires_positive_budget(self):
        with pytest.raises(ValueError):
            Persona(role="r", max_duration=0)

    def test_segment_score_bounds(self):
        with pytest.raises(CutListInvalid):
            CutSegment(TimeRange(0, 1), "t", score=1.5)
