"""Clip-quality metrics over cut-lists and transcripts.

Coverage coherence is the fraction of original segments matched by any
summary clip at threshold tau; adjacency coherence is the mean similarity
of consecutive clips; informativeness is each clip's best match to the
source, averaged; redundancy is the mean pairwise similarity among clips.

The default embedding provider is a deterministic hashed bag-of-words
(dimension 256, fixed 64-bit hash), so scores are bit-stable across runs
and platforms. Absolute values are provider-dependent; definitions and
orderings are what transfer. An HTTP provider hook exists for external
embedders.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from hashlib import blake2b
from statistics import mean, stdev
from typing import Any, Optional, Protocol, Sequence

import numpy as np

from .core import CutList
from .errors import UndefinedMetric
from .transcribe import Transcript

EMBED_DIM = 256

_TOKEN = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class MetricsConfig:
    tau: float = 0.60
    provider: str = "local"

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray:
        ...


class LocalHashEmbedder:
    """Hashed bag-of-words: stable, offline, dimension 256."""

    dim = EMBED_DIM

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN.findall(text.lower()):
            if len(token) < 2:
                continue
            digest = blake2b(token.encode("utf-8"), digest_size=8).digest()
            bucket = int.from_bytes(digest, "little") % self.dim
            vec[bucket] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


class HttpEmbedder:
    """POSTs {"text": ...} to an embedding endpoint returning {"vector": [...]}."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        import httpx

        response = httpx.post(self.url, json={"text": text}, timeout=self.timeout)
        response.raise_for_status()
        vec = np.asarray(response.json()["vector"], dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec


_DEFAULT_PROVIDER = LocalHashEmbedder()


def provider_from_config(cfg: dict[str, Any]) -> EmbeddingProvider:
    section = cfg.get("metrics", {})
    if section.get("provider", "local") == "local":
        return _DEFAULT_PROVIDER
    return HttpEmbedder(section["provider_url"])


def embed_text(text: str, provider: Optional[EmbeddingProvider] = None) -> np.ndarray:
    return (provider or _DEFAULT_PROVIDER).embed(text)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of normalized vectors; zero vectors compare as 0."""
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _text_of(item: Any) -> str:
    if isinstance(item, str):
        return item
    return getattr(item, "text", str(item))


def _embed_all(items: Sequence[Any], provider: Optional[EmbeddingProvider]) -> np.ndarray:
    p = provider or _DEFAULT_PROVIDER
    if not items:
        return np.zeros((0, EMBED_DIM), dtype=np.float64)
    return np.stack([p.embed(_text_of(item)) for item in items])


def _similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # rows are unit or zero vectors, so the plain product is cosine with
    # zero vectors contributing 0 everywhere
    return a @ b.T


def coverage_coherence(
    originals: Sequence[Any],
    summary: Sequence[Any],
    cfg: MetricsConfig = MetricsConfig(),
    provider: Optional[EmbeddingProvider] = None,
) -> float:
    """Fraction of original segments matched by any summary clip at tau."""
    if not originals:
        raise UndefinedMetric("coverage_coherence needs at least one original segment")
    if not summary:
        return 0.0
    sims = _similarity_matrix(_embed_all(originals, provider), _embed_all(summary, provider))
    covered = int(np.count_nonzero(sims.max(axis=1) >= cfg.tau))
    return covered / len(originals)


def adjacency_coherence(
    summary: Sequence[Any], provider: Optional[EmbeddingProvider] = None
) -> float:
    """Mean similarity of consecutive clips; a single clip scores 0."""
    if not summary:
        raise UndefinedMetric("adjacency_coherence needs at least one clip")
    if len(summary) == 1:
        return 0.0
    vecs = _embed_all(summary, provider)
    sims = [cosine(vecs[i], vecs[i + 1]) for i in range(len(summary) - 1)]
    return float(mean(sims))


def informativeness(
    originals: Sequence[Any],
    summary: Sequence[Any],
    provider: Optional[EmbeddingProvider] = None,
) -> float:
    """Each clip's best match to the source, averaged over clips."""
    if not originals or not summary:
        raise UndefinedMetric("informativeness needs non-empty originals and summary")
    sims = _similarity_matrix(_embed_all(summary, provider), _embed_all(originals, provider))
    return float(sims.max(axis=1).mean())


def redundancy(
    summary: Sequence[Any], provider: Optional[EmbeddingProvider] = None
) -> float:
    """Mean pairwise similarity among clips (off-diagonal); one clip is 0."""
    if not summary:
        raise UndefinedMetric("redundancy needs at least one clip")
    if len(summary) == 1:
        return 0.0
    vecs = _embed_all(summary, provider)
    sims = _similarity_matrix(vecs, vecs)
    n = len(summary)
    upper = sims[np.triu_indices(n, k=1)]
    return float(upper.mean())


@dataclass(frozen=True)
class MetricsReport:
    coverage_coherence: float
    adjacency_coherence: float
    informativeness: float
    redundancy: float
    segment_count: int
    mean_segment_duration: float
    meaningful_text_length: int
    tau: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "coverage_coherence": round(self.coverage_coherence, 6),
            "adjacency_coherence": round(self.adjacency_coherence, 6),
            "informativeness": round(self.informativeness, 6),
            "redundancy": round(self.redundancy, 6),
            "segment_count": self.segment_count,
            "mean_segment_duration": round(self.mean_segment_duration, 2),
            "meaningful_text_length": self.meaningful_text_length,
            "tau": self.tau,
        }


def build_report(
    t: Transcript,
    c: CutList,
    cfg: MetricsConfig = MetricsConfig(),
    provider: Optional[EmbeddingProvider] = None,
) -> MetricsReport:
    """Full per-job report over one transcript/cut-list pair."""
    originals = list(t.segments)
    summary = list(c.segments)
    if not summary:
        raise UndefinedMetric("cut-list has no segments")
    words = sum(len(seg.text.split()) for seg in summary)
    durations = [seg.range.duration for seg in summary]
    return MetricsReport(
        coverage_coherence=coverage_coherence(originals, summary, cfg, provider),
        adjacency_coherence=adjacency_coherence(summary, provider),
        informativeness=informativeness(originals, summary, provider),
        redundancy=redundancy(summary, provider),
        segment_count=len(summary),
        mean_segment_duration=float(mean(durations)),
        meaningful_text_length=words,
        tau=cfg.tau,
    )


_BATCH_FIELDS = (
    "coverage_coherence",
    "adjacency_coherence",
    "informativeness",
    "redundancy",
    "segment_count",
    "mean_segment_duration",
    "meaningful_text_length",
)


def summarize_reports(reports: Sequence[MetricsReport]) -> dict[str, str]:
    """Batch presentation: per-metric mean with sample standard deviation."""
    if not reports:
        raise UndefinedMetric("no reports to summarize")
    out = {}
    for name in _BATCH_FIELDS:
        values = [float(getattr(r, name)) for r in reports]
        if len(values) >= 2:
            out[name] = f"{mean(values):.3f} ± {stdev(values):.3f}"
        else:
            out[name] = f"{values[0]:.3f}"
    return out


def batch_csv(reports: Sequence[MetricsReport]) -> str:
    """Per-job rows plus a mean/std footer, CSV-encoded."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(("job",) + _BATCH_FIELDS)
    for i, report in enumerate(reports):
        writer.writerow([i] + [getattr(report, f) for f in _BATCH_FIELDS])
    if len(reports) >= 2:
        writer.writerow(
            ["mean"] + [f"{mean([float(getattr(r, f)) for r in reports]):.6f}" for f in _BATCH_FIELDS]
        )
        writer.writerow(
            ["std"] + [f"{stdev([float(getattr(r, f)) for r in reports]):.6f}" for f in _BATCH_FIELDS]
        )
    return buf.getvalue()
