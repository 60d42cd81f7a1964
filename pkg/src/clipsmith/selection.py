"""Cut-list selection: prompt construction, response parsing with a strict
verbatim check, sanitation against source duration and budget, and the
deterministic heuristic selector (scored 0/1 knapsack with coverage repair).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .core import (
    CutList,
    CutSegment,
    Persona,
    TimeRange,
    normalize_timestamp,
    parse_time_to_seconds,
    render_timestamp,
    validate_cutlist,
)
from .errors import EmptySelection, InvalidTimestamp, SelectionParseError, TimeParseError
from .transcribe import Transcript, TranscriptSegment, merge_fragments

DEFAULT_AGENDA_CUES = (
    "agenda",
    "today we",
    "first",
    "second",
    "finally",
    "to wrap up",
    "in summary",
)

DEFAULT_WEIGHTS = {"keyword": 0.5, "agenda": 0.25, "boundary": 0.25}

_STOPWORDS = {
    "the", "and", "that", "this", "with", "for", "from", "but", "not", "are",
    "was", "were", "have", "has", "had", "you", "your", "they", "their", "our",
    "will", "would", "can", "could", "all", "its", "his", "her", "out", "into",
    "about", "over", "under", "than", "then", "them", "these", "those", "when",
    "where", "which", "while", "what", "who", "how", "why", "let", "lets",
}

_BOUNDARY_TOLERANCE = 0.01
_MERGE_GAP = 0.25          # seconds; smaller gaps merge during sanitation
_MIN_SEGMENT = 1.00        # seconds; shorter survivors are extended or dropped
_BUDGET_TOLERANCE = 1.1    # fraction of persona.max_duration allowed before trimming
_KNAPSACK_RESOLUTION = 25  # centiseconds per knapsack weight unit
_EXACT_DP_LIMIT = 64       # candidates; greedy density heuristic above this
_SCORE_EPS = 1e-9          # score sums closer than this count as tied


def _key_better(a: tuple, b: tuple) -> bool:
    """Element-wise earlier start wins; a set extending a tied prefix wins
    over the prefix (so a full-budget selection keeps zero-score segments)."""
    for x, y in zip(a, b):
        if x < y:
            return True
        if x > y:
            return False
    return len(a) > len(b)


def _better(score_a: float, key_a: tuple, score_b: float, key_b: tuple) -> bool:
    """Total order on selections: higher score, then the start-time key."""
    if score_a > score_b + _SCORE_EPS:
        return True
    if score_b > score_a + _SCORE_EPS:
        return False
    return _key_better(key_a, key_b)


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    schema_hint: dict[str, Any]


@dataclass(frozen=True)
class Annotation:
    entry: Any
    reason: str


@dataclass
class SelectionResponse:
    raw: str
    parsed: Optional[CutList] = None
    annotations: list[Annotation] = field(default_factory=list)
    attempts: int = 1


@dataclass(frozen=True)
class SegmentScore:
    keyword: float
    agenda: int
    boundary: float
    combined: float

    @classmethod
    def build(
        cls, keyword: float, agenda: int, boundary: float,
        weights: Optional[dict[str, float]] = None,
    ) -> "SegmentScore":
        w = weights or DEFAULT_WEIGHTS
        combined = w["keyword"] * keyword + w["agenda"] * agenda + w["boundary"] * boundary
        return cls(keyword=keyword, agenda=agenda, boundary=boundary, combined=round(combined, 6))


# ---------------------------------------------------------------------------
# prompt construction
# ---------------------------------------------------------------------------

SYSTEM_PROMPT = """\
You are an expert assistant for selecting the most meaningful content from a video.
Your task is to identify and extract the important segments that together form a
highlight clip within the requested duration budget.
Use the original spoken text exactly as-is. Do not paraphrase.

Critical instruction: you MUST preserve the exact wording, phrasing, and sentences
from the original video. Do not rephrase, summarize, or generate new text. All
extracted text must be copied verbatim from the source.

Segment selection criteria:
- Reflect the most important ideas, agenda points, or transitions.
- Ensure coverage across the full video duration, including beginning and end sections when relevant.
- Consider speaker tone, pauses, and natural breaks to ensure smooth clip transitions.

Timestamp rules:
- Do not use timestamps in HH:MM:SS format.
- Convert all time references into seconds only.
- Use at most two decimal places for timestamps.
- If timestamps are not applicable, use "N/A" or omit the start and end fields.

Respond with a valid JSON object. The entire response must be correctly formatted
and parsable.

Required output JSON structure:
{
  "select_segments": [
    {
      "start": 12.5,
      "end": 25.3,
      "text": "We begin ..."
    }
  ]
}
"""

SCHEMA_HINT: dict[str, Any] = {
    "select_segments": [{"start": 0.0, "end": 0.0, "text": ""}]
}


def render_transcript_lines(t: Transcript) -> str:
    return "\n".join(
        f"[{render_timestamp(s.range.start)} - {render_timestamp(s.range.end)}] {s.text}"
        for s in t.segments
    )


def build_prompt(t: Transcript, persona: Persona) -> PromptBundle:
    """Embed role, requirements, budget, and the timestamped transcript."""
    parts = [f"Role/style: {persona.role}"]
    if persona.extra_requirements.strip():
        parts.append(f"Additional requirements: {persona.extra_requirements.strip()}")
    if persona.keywords:
        parts.append("Keywords to prioritize: " + ", ".join(persona.keywords))
    parts.append(
        f"Target maximum clip duration: {render_timestamp(persona.max_duration)} seconds."
    )
    parts.append("")
    parts.append("Transcript with segment timestamps (seconds):")
    parts.append(render_transcript_lines(t))
    return PromptBundle(
        system_text=SYSTEM_PROMPT,
        user_text="\n".join(parts),
        schema_hint=SCHEMA_HINT,
    )


def build_visual_prompt(video_ref: str, duration: float, persona: Persona) -> PromptBundle:
    """Prompt variant for voiceover-free sources: same schema, no transcript."""
    parts = [f"Role/style: {persona.role}"]
    if persona.extra_requirements.strip():
        parts.append(f"Additional requirements: {persona.extra_requirements.strip()}")
    parts.append(
        f"Target maximum clip duration: {render_timestamp(persona.max_duration)} seconds."
    )
    parts.append("")
    parts.append(f"Video reference: {video_ref}")
    parts.append(f"Video duration: {render_timestamp(duration)} seconds.")
    parts.append(
        "This video has no voiceover. Select visually salient segments and "
        "describe each scene in the text field."
    )
    return PromptBundle(
        system_text=SYSTEM_PROMPT,
        user_text="\n".join(parts),
        schema_hint=SCHEMA_HINT,
    )


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```(?:[a-zA-Z0-9_+-]*)\s*\n?(.*?)```", re.DOTALL)


def _fold(text: str) -> str:
    return " ".join(text.casefold().split())


def _find_structure(raw: str) -> Any:
    """Locate the select_segments payload inside arbitrary response text."""
    candidates = [raw.strip()]
    candidates.extend(m.group(1).strip() for m in _FENCE.finditer(raw))

    decoder = json.JSONDecoder()
    for text in candidates:
        if not text:
            continue
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            pass
        # a bare `"select_segments": [...]` fragment
        if '"select_segments"' in text:
            try:
                return json.loads("{" + text.strip().strip(",") + "}")
            except json.JSONDecodeError:
                pass
        # first decodable object or array embedded in prose
        for opener in ("{", "["):
            pos = 0
            for _ in range(64):
                idx = text.find(opener, pos)
                if idx < 0:
                    break
                try:
                    obj, _end = decoder.raw_decode(text[idx:])
                except json.JSONDecodeError:
                    pos = idx + 1
                    continue
                if isinstance(obj, dict) and "select_segments" in obj:
                    return obj
                if isinstance(obj, list) and obj and isinstance(obj[0], dict):
                    return obj
                pos = idx + 1
    return None


def _coerce_time(value: Any) -> Optional[float]:
    """Numbers pass through; strings may be decimal or clock form."""
    if isinstance(value, bool):
        raise TimeParseError(repr(value))
    if isinstance(value, (int, float)):
        return normalize_timestamp(float(value))
    if isinstance(value, str):
        if value.strip().upper() in ("", "N/A", "NA", "NONE"):
            return None
        return parse_time_to_seconds(value)
    raise TimeParseError(repr(value))


@dataclass
class ParsedSelection:
    cutlist: CutList
    annotations: list[Annotation] = field(default_factory=list)


def parse_selection(
    raw: str,
    t: Transcript,
    source_duration: float,
    allow_unverified_text: bool = False,
) -> ParsedSelection:
    """Extract and vet the select_segments payload from a raw model response.

    Tolerates code fences, surrounding prose, clock-form timestamps, and
    string numbers. Every surviving segment's text must occur verbatim
    (whitespace/case-folded containment) in the transcript; rejected entries
    land in annotations. Range enforcement against source_duration is left
    to sanitation.
    """
    structure = _find_structure(raw)
    if structure is None:
        raise SelectionParseError("no select_segments structure found in response", raw=raw)
    if isinstance(structure, dict):
        entries = structure.get("select_segments")
    else:
        entries = structure
    if not isinstance(entries, list):
        raise SelectionParseError("select_segments is not an array", raw=raw)

    folded_transcript = _fold(t.full_text)
    segments: list[CutSegment] = []
    annotations: list[Annotation] = []

    for entry in entries:
        if not isinstance(entry, dict):
            annotations.append(Annotation(entry, "entry is not an object"))
            continue
        try:
            start = _coerce_time(entry.get("start"))
            end = _coerce_time(entry.get("end"))
        except (TimeParseError, InvalidTimestamp, ValueError) as exc:
            annotations.append(Annotation(entry, f"unparseable timestamp: {exc}"))
            continue
        if start is None or end is None:
            annotations.append(Annotation(entry, "timestamps not applicable"))
            continue
        if end <= start:
            annotations.append(Annotation(entry, "empty or inverted range"))
            continue

        text = str(entry.get("text", "") or "").strip()
        if not allow_unverified_text:
            if not text:
                annotations.append(Annotation(entry, "empty text"))
                continue
            if _fold(text) not in folded_transcript:
                annotations.append(Annotation(entry, "text not found verbatim in transcript"))
                continue

        score = entry.get("score")
        if score is not None:
            try:
                score = min(1.0, max(0.0, float(score)))
            except (TypeError, ValueError):
                score = None
        reason = entry.get("reason")
        segments.append(
            CutSegment(
                range=TimeRange(start, end),
                text=text,
                reason=str(reason) if reason is not None else None,
                score=score,
            )
        )

    if not segments:
        exc = EmptySelection("no segments survived parsing")
        exc.annotations = annotations  # type: ignore[attr-defined]
        raise exc
    return ParsedSelection(
        cutlist=CutList(video_id="", persona_id="", segments=segments),
        annotations=annotations,
    )


# ---------------------------------------------------------------------------
# sanitation
# ---------------------------------------------------------------------------

def _cents(value: float) -> int:
    return round(normalize_timestamp(value) * 100)


def _retext(start_c: int, end_c: int, transcript: Optional[Transcript], fallback: str) -> str:
    """Re-derive merged-segment text from the transcript so it stays a
    verbatim (folded) substring of the source."""
    if transcript is None or not transcript.segments:
        return fallback
    lo, hi = start_c / 100.0, end_c / 100.0
    parts = [
        s.text for s in transcript.segments
        if s.range.start < hi and s.range.end > lo
    ]
    return " ".join(parts) if parts else fallback


def sanitize_cutlist(
    cutlist: CutList,
    source_duration: float,
    persona: Persona,
    transcript: Optional[Transcript] = None,
) -> CutList:
    """Repair a possibly-invalid cut-list into one that validates.

    Clamps ranges into the source, sorts, merges overlapping or
    nearly-adjacent segments, extends sub-second survivors to 1.00 s where
    the source allows, and trims lowest-scoring segments until the total
    fits 110% of the persona budget.
    """
    dur_c = _cents(source_duration)
    budget_allowance_c = (_cents(persona.max_duration) * 11) // 10
    merge_gap_c = round(_MERGE_GAP * 100)
    min_len_c = round(_MIN_SEGMENT * 100)

    work: list[dict] = []
    for seg in cutlist.segments:
        start_c = max(0, _cents(seg.range.start))
        end_c = min(dur_c, _cents(seg.range.end))
        if end_c - start_c <= 0:
            continue
        work.append(
            {
                "start": start_c,
                "end": end_c,
                "text": seg.text,
                "reason": seg.reason,
                "score": seg.score if seg.score is not None else 0.0,
                "explicit_score": seg.score is not None,
            }
        )
    work.sort(key=lambda w: (w["start"], w["end"]))

    def merge_pass(items: list[dict]) -> list[dict]:
        out: list[dict] = []
        for item in items:
            if out and item["start"] - out[-1]["end"] < merge_gap_c:
                prev = out[-1]
                new_start = prev["start"]
                new_end = max(prev["end"], item["end"])
                fallback = " ".join(x for x in (prev["text"], item["text"]) if x).strip()
                prev.update(
                    start=new_start,
                    end=new_end,
                    text=_retext(new_start, new_end, transcript, fallback),
                    reason=prev["reason"] or item["reason"],
                    score=max(prev["score"], item["score"]),
                    explicit_score=prev["explicit_score"] or item["explicit_score"],
                )
            else:
                out.append(dict(item))
        return out

    work = merge_pass(work)

    extended: list[dict] = []
    for item in work:
        length = item["end"] - item["start"]
        if length >= min_len_c:
            extended.append(item)
            continue
        if dur_c < min_len_c:
            continue  # source too short to host a minimum-length segment
        need = min_len_c - length
        start = item["start"] - need // 2
        end = item["end"] + (need - need // 2)
        if start < 0:
            end += -start
            start = 0
        if end > dur_c:
            start -= end - dur_c
            end = dur_c
        item["start"], item["end"] = max(0, start), end
        extended.append(item)
    work = merge_pass(sorted(extended, key=lambda w: (w["start"], w["end"])))

    # budget: drop lowest score first, ties resolved against the latest start
    while work and sum(w["end"] - w["start"] for w in work) > budget_allowance_c:
        victim = min(work, key=lambda w: (w["score"], -w["start"]))
        work.remove(victim)

    if not work:
        raise EmptySelection("no segments survived sanitation")

    segments = [
        CutSegment(
            range=TimeRange(w["start"] / 100.0, w["end"] / 100.0),
            text=w["text"],
            reason=w["reason"],
            score=round(w["score"], 6) if w["explicit_score"] else None,
        )
        for w in work
    ]
    result = CutList(
        video_id=cutlist.video_id, persona_id=cutlist.persona_id, segments=segments
    )
    validate_cutlist(result, source_duration)  # sanity: output must always validate
    return result


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def _tokens(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.casefold())


def tfidf_keywords(t: Transcript, top_n: int = 10) -> list[str]:
    """Top terms of the transcript by summed tf-idf over its segments.

    idf = ln(N/df) with no smoothing, so a uniform duplication of all
    documents leaves the ranking unchanged.
    """
    docs = [
        [w for w in _tokens(s.text) if len(w) >= 3 and w not in _STOPWORDS]
        for s in t.segments
    ]
    docs = [d for d in docs if d]
    if not docs:
        return []
    n_docs = len(docs)
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(doc):
            df[term] = df.get(term, 0) + 1
    scores: dict[str, float] = {}
    for doc in docs:
        length = len(doc)
        counts: dict[str, int] = {}
        for term in doc:
            counts[term] = counts.get(term, 0) + 1
        for term, count in counts.items():
            idf = math.log(n_docs / df[term])
            scores[term] = scores.get(term, 0.0) + (count / length) * idf
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [term for term, score in ranked[:top_n] if score > 0]


def _keyword_score(seg_text: str, keywords: Sequence[str]) -> float:
    if not keywords:
        return 0.0
    token_set = set(_tokens(seg_text))
    folded = _fold(seg_text)
    matched = 0
    for keyword in keywords:
        k = keyword.strip().casefold()
        if not k:
            continue
        if " " in k:
            if k in folded:
                matched += 1
        elif k in token_set:
            matched += 1
    return matched / max(1, len(keywords))


def _agenda_score(seg_text: str, cues: Sequence[str]) -> int:
    folded = seg_text.casefold()
    return 1 if any(cue in folded for cue in cues) else 0


def _boundary_score(
    seg: TranscriptSegment, pauses: Sequence[TimeRange], transcript_end: float
) -> float:
    score = 0.0
    if any(abs(seg.range.start - p.end) <= _BOUNDARY_TOLERANCE for p in pauses) or (
        seg.range.start <= _BOUNDARY_TOLERANCE
    ):
        score += 0.5
    if any(abs(seg.range.end - p.start) <= _BOUNDARY_TOLERANCE for p in pauses) or (
        abs(seg.range.end - transcript_end) <= _BOUNDARY_TOLERANCE
    ):
        score += 0.5
    return score


def score_segment(
    seg: TranscriptSegment,
    persona: Persona,
    t: Transcript,
    pauses: Sequence[TimeRange],
    keywords: Optional[Sequence[str]] = None,
    weights: Optional[dict[str, float]] = None,
    agenda_cues: Sequence[str] = DEFAULT_AGENDA_CUES,
) -> SegmentScore:
    """Score one candidate on keyword hits, agenda cues, and pause alignment."""
    if keywords is None:
        keywords = persona.keywords if persona.keywords else tfidf_keywords(t)
    transcript_end = t.segments[-1].range.end if t.segments else t.source_duration
    return SegmentScore.build(
        keyword=_keyword_score(seg.text, keywords),
        agenda=_agenda_score(seg.text, agenda_cues),
        boundary=_boundary_score(seg, pauses, transcript_end),
        weights=weights,
    )


# ---------------------------------------------------------------------------
# heuristic selection (0/1 knapsack + coverage repair)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    start: float
    end: float
    score: float

    @property
    def duration(self) -> float:
        return self.end - self.start


def _weight(c: Candidate) -> int:
    return max(1, math.ceil((_cents(c.end) - _cents(c.start)) / _KNAPSACK_RESOLUTION))


def _selection_key(indices: Sequence[int], candidates: Sequence[Candidate]) -> tuple:
    return tuple(sorted(candidates[i].start for i in indices))


def choose_candidates(
    candidates: Sequence[Candidate],
    budget: float,
    source_duration: float,
) -> list[int]:
    """Pick candidate indices maximizing total score within the budget.

    Exact dynamic program at 0.25 s duration resolution up to 64 candidates,
    score/duration-density greedy above that. Score ties resolve toward the
    selection whose sorted start times are lexicographically earliest. A
    post-pass guarantees first/last-decile coverage when such candidates
    exist, swapping in the best decile candidate and evicting the
    lowest-scoring non-decile segments as needed.
    """
    n = len(candidates)
    if n == 0:
        return []
    capacity = math.floor(_cents(budget) / _KNAPSACK_RESOLUTION)
    weights = [_weight(c) for c in candidates]
    order = sorted(range(n), key=lambda i: (candidates[i].start, candidates[i].end, i))

    if n <= _EXACT_DP_LIMIT:
        chosen = _knapsack_exact(candidates, weights, capacity, order)
    else:
        chosen = _knapsack_greedy(candidates, weights, capacity, order)

    chosen = _ensure_decile_coverage(chosen, candidates, weights, capacity, source_duration)
    return sorted(chosen, key=lambda i: (candidates[i].start, candidates[i].end, i))


def _knapsack_exact(
    candidates: Sequence[Candidate],
    weights: Sequence[int],
    capacity: int,
    order: Sequence[int],
) -> set[int]:
    if sum(weights) <= capacity:
        return set(order)  # budget covers everything
    capacity = min(capacity, sum(weights))
    # dp[w] = (score, key, frozenset indices); items processed in start order
    # so selection keys grow already sorted
    empty: tuple[float, tuple, frozenset] = (0.0, (), frozenset())
    dp: list[tuple[float, tuple, frozenset]] = [empty] * (capacity + 1)
    for idx in order:
        w_i = weights[idx]
        s_i = candidates[idx].score
        start_i = candidates[idx].start
        if w_i > capacity:
            continue
        for w in range(capacity, w_i - 1, -1):
            base_score, base_key, base_set = dp[w - w_i]
            cand = (base_score + s_i, base_key + (start_i,), base_set | {idx})
            cur = dp[w]
            if _better(cand[0], cand[1], cur[0], cur[1]):
                dp[w] = cand
    best = dp[0]
    for state in dp[1:]:
        if _better(state[0], state[1], best[0], best[1]):
            best = state
    return set(best[2])


def _knapsack_greedy(
    candidates: Sequence[Candidate],
    weights: Sequence[int],
    capacity: int,
    order: Sequence[int],
) -> set[int]:
    by_density = sorted(
        order,
        key=lambda i: (-(candidates[i].score / max(weights[i], 1)), candidates[i].start),
    )
    chosen: set[int] = set()
    used = 0
    for idx in by_density:
        if used + weights[idx] <= capacity:
            chosen.add(idx)
            used += weights[idx]
    return chosen


def _ensure_decile_coverage(
    chosen: set[int],
    candidates: Sequence[Candidate],
    weights: Sequence[int],
    capacity: int,
    source_duration: float,
) -> set[int]:
    if source_duration <= 0:
        return chosen
    first_cut = source_duration / 10.0
    last_cut = source_duration * 9.0 / 10.0
    first_ids = {i for i, c in enumerate(candidates) if c.start < first_cut}
    last_ids = {i for i, c in enumerate(candidates) if c.end > last_cut}
    decile_ids = first_ids | last_ids
    pinned: set[int] = set()

    for ids in (first_ids, last_ids):
        if not ids or chosen & ids:
            continue
        swap_in = max(ids, key=lambda i: (candidates[i].score, -candidates[i].start))
        if weights[swap_in] > capacity:
            continue  # cannot fit any candidate from this decile
        chosen = set(chosen)
        chosen.add(swap_in)
        pinned.add(swap_in)
        while sum(weights[i] for i in chosen) > capacity:
            evictable = [i for i in chosen if i not in pinned and i not in decile_ids]
            if not evictable:
                evictable = [i for i in chosen if i not in pinned]
            if not evictable:
                break
            victim = min(evictable, key=lambda i: (candidates[i].score, -candidates[i].start))
            chosen.remove(victim)
    return chosen


def _reason_for(score: SegmentScore, keywords: Sequence[str], text: str) -> str:
    parts = []
    if score.keyword > 0:
        hits = [k for k in keywords if k.casefold() in _fold(text)]
        parts.append("keywords: " + ", ".join(hits[:4]))
    if score.agenda:
        parts.append("agenda cue")
    if score.boundary >= 1.0:
        parts.append("pause-aligned")
    elif score.boundary > 0:
        parts.append("partially pause-aligned")
    return "; ".join(parts) if parts else "coverage pick"


def heuristic_select(
    t: Transcript,
    persona: Persona,
    pauses: Sequence[TimeRange],
    weights: Optional[dict[str, float]] = None,
    agenda_cues: Sequence[str] = DEFAULT_AGENDA_CUES,
    video_id: str = "",
    persona_id: str = "",
) -> CutList:
    """Deterministic selector: fragment-merged transcript segments are the
    candidates; score them, solve the knapsack under the persona budget,
    enforce first/last-decile coverage, sanitize."""
    if not t.segments:
        raise EmptySelection("transcript has no segments")
    merged_t = merge_fragments(t)
    keywords = persona.keywords if persona.keywords else tfidf_keywords(merged_t)
    scored = [
        score_segment(s, persona, merged_t, pauses, keywords=keywords, weights=weights,
                      agenda_cues=agenda_cues)
        for s in merged_t.segments
    ]
    candidates = [
        Candidate(start=s.range.start, end=s.range.end, score=sc.combined)
        for s, sc in zip(merged_t.segments, scored)
    ]
    chosen = choose_candidates(candidates, persona.max_duration, merged_t.source_duration)
    if not chosen:
        raise EmptySelection("no candidates fit the duration budget")

    segments = [
        CutSegment(
            range=merged_t.segments[i].range,
            text=merged_t.segments[i].text,
            reason=_reason_for(scored[i], keywords, merged_t.segments[i].text),
            score=min(1.0, round(scored[i].combined, 6)),
        )
        for i in chosen
    ]
    cutlist = CutList(video_id=video_id, persona_id=persona_id, segments=segments)
    return sanitize_cutlist(cutlist, t.source_duration, persona, transcript=t)
