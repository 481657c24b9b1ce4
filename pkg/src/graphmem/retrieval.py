"""Graph-guided retrieval: anchor on themes, drill into archives, re-rank.

Stage one finds the nearest themes by embedding and widens the set with
their one-hop graph neighbors.  Stage two follows cross-layer links down to
the archived utterances behind those themes (plus the live buffer, so the
ongoing episode is never invisible).  Stage three scores each utterance with
a pairwise relevance probability modulated multiplicatively by temporal,
confidence and speaker-match boosts.

The whole path is read-only and safe to run concurrently over one snapshot.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import EngineConfig
from .core import EventNode, MemorySnapshot, TopicGraph, neighbors
from .errors import CorruptionError, ProviderError
from .providers import ProviderBundle
from .store import VectorIndex, vector_topk

logger = logging.getLogger(__name__)

LIVE_PROVENANCE = "live"

# Documented stand-in inventory for temporal expressions: month and weekday
# names, a few relative markers (including interrogative "when"), 4-digit
# years, and clock/date digit pairs.
TEMPORAL_RE = re.compile(
    r"\b(?:january|february|march|april|may|june|july|august|september"
    r"|october|november|december"
    r"|monday|tuesday|wednesday|thursday|friday|saturday|sunday"
    r"|yesterday|today|tomorrow|last|ago|next|when)\b"
    r"|\b\d{4}\b"
    r"|\b\d{1,2}[:/]\d{2}\b",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class Query:
    text: str
    asked_at: str | None = None
    target_speakers: frozenset[str] | None = None
    time_sensitive: bool | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("query text must be non-empty")

    @classmethod
    def from_dict(cls, payload: dict) -> "Query":
        """Wire form: {text, asked_at?, target_speakers?, time_sensitive?}."""
        known = {"text", "asked_at", "target_speakers", "time_sensitive"}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown query keys: {sorted(unknown)}")
        speakers = payload.get("target_speakers")
        return cls(
            text=payload["text"],
            asked_at=payload.get("asked_at"),
            target_speakers=frozenset(speakers) if speakers is not None else None,
            time_sensitive=payload.get("time_sensitive"),
        )


@dataclass(frozen=True)
class AnchorSet:
    """Top themes by similarity plus their one-hop expansions."""

    seeds: tuple[tuple[str, float], ...]
    expansions: tuple[str, ...]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.seeds) + self.expansions

    def __len__(self) -> int:
        return len(self.seeds) + len(self.expansions)


@dataclass(frozen=True)
class CandidateEvent:
    node: EventNode
    source_archive_id: str
    anchor_topic_id: str


@dataclass(frozen=True)
class IndicatorFlags:
    time: int
    conf: int
    role: int

    def to_dict(self) -> dict:
        return {"time": self.time, "conf": self.conf, "role": self.role}


@dataclass(frozen=True)
class RankedCandidate:
    event_node_id: str
    source_archive_id: str
    anchor_topic_id: str
    p_sem: float
    indicators: IndicatorFlags
    score: float
    rank: int
    degraded: bool = False

    def to_dict(self) -> dict:
        """Every score component, exposed for auditability."""
        return {
            "event_node_id": self.event_node_id,
            "source_archive_id": self.source_archive_id,
            "anchor_topic_id": self.anchor_topic_id,
            "p_sem": self.p_sem,
            "indicators": self.indicators.to_dict(),
            "score": self.score,
            "rank": self.rank,
            "degraded": self.degraded,
        }


def anchor(topic_graph: TopicGraph, query_embedding: np.ndarray, k: int) -> AnchorSet:
    """Seed on the top-k themes and expand one hop along theme edges."""
    if k < 1:
        raise ValueError("k must be >= 1")
    vector = np.asarray(query_embedding, dtype=float)
    index = VectorIndex.from_topic_graph(topic_graph, vector.shape[0])
    seeds = vector_topk(index, vector, k)
    seed_ids = {s for s, _ in seeds}
    expanded: set[str] = set()
    for seed_id in seed_ids:
        expanded |= neighbors(topic_graph, seed_id)
    return AnchorSet(tuple(seeds), tuple(sorted(expanded - seed_ids)))


def drill_down(
    snapshot: MemorySnapshot, anchors: AnchorSet | Sequence[str]
) -> list[CandidateEvent]:
    """Collect the archived utterances behind every anchor, deduplicated.

    Anchors are visited in ascending id order, so on any overlap a candidate
    keeps the smallest anchor id as its provenance.
    """
    anchor_ids = anchors.ids if isinstance(anchors, AnchorSet) else tuple(anchors)
    candidates: list[CandidateEvent] = []
    seen: set[str] = set()
    for anchor_id in sorted(anchor_ids):
        if anchor_id not in snapshot.topic_graph.nodes:
            raise ValueError(f"unknown anchor {anchor_id}")
        archive_id = snapshot.cross_index.get(anchor_id)
        if archive_id is None:
            raise CorruptionError("cross-index-covers-topics", anchor_id)
        graph = snapshot.archive.get(archive_id)
        if graph is None:
            raise CorruptionError("cross-index-target-exists", archive_id)
        for node in graph.nodes:
            if node.id not in seen:
                seen.add(node.id)
                candidates.append(CandidateEvent(node, archive_id, anchor_id))
    return candidates


def is_time_sensitive(
    query: Query, classifier: Callable[[str], bool] | None = None
) -> bool:
    if query.time_sensitive is not None:
        return query.time_sensitive
    if classifier is not None:
        return bool(classifier(query.text))
    return bool(TEMPORAL_RE.search(query.text))


def time_indicator(
    query: Query,
    candidate: EventNode,
    classifier: Callable[[str], bool] | None = None,
) -> int:
    if not is_time_sensitive(query, classifier):
        return 0
    if TEMPORAL_RE.search(candidate.text) or candidate.timestamp:
        return 1
    return 0


def role_indicator(query: Query, candidate: EventNode) -> int:
    speaker = candidate.speaker.lower()
    if speaker and speaker in query.text.lower():
        return 1
    if query.target_speakers and speaker in {
        s.lower() for s in query.target_speakers
    }:
        return 1
    return 0


def conf_indicator(candidate: EventNode) -> int:
    return int(candidate.confidence_flag)


def rerank(
    query: Query,
    candidates: Sequence[CandidateEvent],
    providers: ProviderBundle,
    config: EngineConfig,
    k: int | None = None,
) -> list[RankedCandidate]:
    """Score, boost and order candidates; return the top ``k``.

    The score is exactly ``p_sem * beta_time^t * beta_conf^c * beta_role^r``.
    Ties resolve to the more recent utterance (larger creation order), then
    the smaller node id.  A relevance-provider failure degrades that
    candidate to embedding cosine and marks it.
    """
    if k is None:
        k = config.retrieval_k
    scored: list[RankedCandidate] = []
    query_vector = None
    for candidate in candidates:
        degraded = False
        try:
            p_sem = float(providers.relevance_scorer.score(query.text, candidate.node.text))
        except ProviderError as exc:
            logger.warning(
                "relevance scoring failed for %s (%s); degrading to cosine",
                candidate.node.id,
                exc,
            )
            if query_vector is None:
                query_vector = providers.embedder.embed(query.text)
            cosine = float(
                np.dot(query_vector, providers.embedder.embed(candidate.node.text))
            )
            p_sem = max(cosine, 0.01)
            degraded = True
        p_sem = min(max(p_sem, 0.0), 1.0)
        flags = IndicatorFlags(
            time=time_indicator(query, candidate.node, providers.time_classifier),
            conf=conf_indicator(candidate.node),
            role=role_indicator(query, candidate.node),
        )
        score = (
            p_sem
            * config.beta_time**flags.time
            * config.beta_conf**flags.conf
            * config.beta_role**flags.role
        )
        scored.append(
            RankedCandidate(
                event_node_id=candidate.node.id,
                source_archive_id=candidate.source_archive_id,
                anchor_topic_id=candidate.anchor_topic_id,
                p_sem=p_sem,
                indicators=flags,
                score=score,
                rank=0,
                degraded=degraded,
            )
        )
    scored.sort(
        key=lambda c: (-c.score, -int(c.event_node_id[1:]), c.event_node_id)
    )
    return [
        RankedCandidate(
            event_node_id=c.event_node_id,
            source_archive_id=c.source_archive_id,
            anchor_topic_id=c.anchor_topic_id,
            p_sem=c.p_sem,
            indicators=c.indicators,
            score=c.score,
            rank=position + 1,
            degraded=c.degraded,
        )
        for position, c in enumerate(scored[:k])
    ]


def retrieve(
    snapshot: MemorySnapshot,
    query: Query,
    providers: ProviderBundle,
    k: int | None = None,
    include_live: bool = True,
) -> list[RankedCandidate]:
    """Full three-stage pipeline over one immutable snapshot."""
    config = snapshot.config
    if k is None:
        k = config.retrieval_k
    query_vector = providers.embedder.embed(query.text)
    anchors = anchor(snapshot.topic_graph, query_vector, k)
    candidates = drill_down(snapshot, anchors)
    if include_live:
        candidates.extend(
            CandidateEvent(node, LIVE_PROVENANCE, LIVE_PROVENANCE)
            for node in snapshot.buffer
        )
    if not candidates:
        return []
    return rerank(query, candidates, providers, config, k)


def event_lookup(snapshot: MemorySnapshot) -> dict[str, EventNode]:
    """Event id to node map across archives and the live buffer."""
    table = {n.id: n for n in snapshot.buffer}
    for graph in snapshot.archive.values():
        for node in graph.nodes:
            table[node.id] = node
    return table
