"""Transactional merge of a buffered episode into the topic layer.

One consolidation summarizes a buffer prefix, embeds the summary, scores it
against a small vector-retrieved candidate pool (never the whole graph),
admits edges above the confidence threshold, archives the prefix, and wires
the cross-layer link.  The entire transition is all-or-nothing: a failed
summary or embedding leaves the caller's snapshot untouched, while a failed
relation score only drops that one candidate.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .boundary import BoundaryVerdict
from .core import (
    DIRECTED_RELATIONS,
    EngineState,
    EventNode,
    MemorySnapshot,
    Relation,
    TopicEdge,
    TopicGraph,
    TopicNode,
    UNRELATED,
    archive_segment,
    insert_topic_node,
    next_topic_id,
    raw_text,
)
from .errors import ConsolidationError, ProviderError, ProviderParseError, StateError
from .providers import ProviderBundle, RelationScorer
from .store import VectorIndex, vector_topk

logger = logging.getLogger(__name__)

_RELATION_LABELS = {r.value for r in Relation} | {UNRELATED}


@dataclass(frozen=True)
class ConsolidationReport:
    """Audit record for one committed consolidation."""

    new_topic_id: str
    archive_id: str
    candidate_pool: tuple[tuple[str, float], ...]
    scored_relations: tuple[tuple[str, str, float], ...]
    accepted_edges: int
    forced: bool
    elapsed: float
    provider_tokens: dict
    skipped_candidates: tuple[str, ...] = ()
    entailment_defaults: int = 0


def select_candidates(
    topic_graph: TopicGraph,
    summary_embedding: np.ndarray,
    k_cand: int,
) -> list[tuple[str, float]]:
    """The coarse retrieval step: nearest themes by cosine, ties by id."""
    vector = np.asarray(summary_embedding, dtype=float)
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"summary embedding must be unit-normalized, norm={norm}")
    index = VectorIndex.from_topic_graph(topic_graph, vector.shape[0])
    return vector_topk(index, vector, k_cand)


def score_relation(
    first_summary: str,
    second_summary: str,
    scorer: RelationScorer,
) -> tuple[str, float]:
    """Label and weight for one candidate pair.

    Output that is still malformed after the provider's own repair pass is
    demoted to ``(unrelated, 0)`` and logged rather than failing the
    transaction; transport failures propagate so the caller can skip the
    candidate.
    """
    if not first_summary or not second_summary:
        raise ValueError("both summaries must be non-empty")
    try:
        label, weight = scorer.score(first_summary, second_summary)
    except ProviderParseError as exc:
        logger.warning("relation scorer output unusable (%s); treating as unrelated", exc)
        return UNRELATED, 0.0
    if label not in _RELATION_LABELS or not 0.0 <= float(weight) <= 1.0:
        logger.warning("relation scorer returned invalid (%r, %r)", label, weight)
        return UNRELATED, 0.0
    return label, float(weight)


def consolidate_segment(
    snapshot: MemorySnapshot,
    segment: Sequence[EventNode],
    providers: ProviderBundle,
    forced: bool = False,
) -> tuple[ConsolidationReport, MemorySnapshot]:
    """Merge the given buffer prefix into the topic layer.

    ``segment`` must be exactly a prefix of the active buffer; the committed
    snapshot has that prefix archived, one new theme, one new cross link,
    and the remaining suffix still buffered.  Raises
    :class:`ConsolidationError` on abort, leaving the input snapshot the
    caller holds fully intact.
    """
    if snapshot.state is not EngineState.EPISODIC_BUFFERING:
        raise StateError("consolidation re-entered")
    buffer = snapshot.buffer
    if not segment:
        raise ValueError("segment must be non-empty")
    if len(segment) > len(buffer) or any(
        node.id != buffer[i].id for i, node in enumerate(segment)
    ):
        raise ValueError("segment must be a prefix of the active buffer")

    config = snapshot.config
    started = time.perf_counter()
    log_start = len(providers.call_log)
    working = replace(snapshot, state=EngineState.SEMANTIC_CONSOLIDATION)
    segment_nodes = buffer[: len(segment)]
    content = raw_text(segment_nodes)

    try:
        summary_result = providers.summarizer.summarize(content)
        embedding = np.asarray(providers.embedder.embed(summary_result.summary), float)
    except ProviderError as exc:
        raise ConsolidationError(f"aborted: {exc}") from exc
    norm = float(np.linalg.norm(embedding))
    if norm < 1e-12:
        raise ConsolidationError("aborted: degenerate summary embedding")
    embedding = embedding / norm

    flags = []
    entailment_defaults = 0
    for node in segment_nodes:
        try:
            flags.append(
                bool(providers.entailment.entails(summary_result.summary, node.text))
            )
        except ProviderError:
            # The flag is advisory; default to trusted rather than aborting.
            flags.append(True)
            entailment_defaults += 1

    new_id = next_topic_id(working)
    candidates = select_candidates(working.topic_graph, embedding, config.k_cand)
    scored: list[tuple[str, str, float]] = []
    skipped: list[str] = []
    for topic_id, _similarity in candidates:
        other = working.topic_graph.nodes[topic_id]
        try:
            label, weight = score_relation(
                summary_result.summary, other.summary, providers.relation_scorer
            )
        except ProviderError as exc:
            logger.warning("relation scoring failed for %s: %s", topic_id, exc)
            skipped.append(topic_id)
            continue
        scored.append((topic_id, label, weight))

    edges = [
        TopicEdge(
            from_id=new_id,
            to_id=topic_id,
            relation=Relation(label),
            weight=weight,
            directed=Relation(label) in DIRECTED_RELATIONS,
        )
        for topic_id, label, weight in scored
        if label != UNRELATED and weight > config.tau
    ]

    archive_id, working = archive_segment(working, len(segment_nodes), flags)
    node = TopicNode(
        id=new_id,
        summary=summary_result.summary,
        keywords=summary_result.keywords,
        raw=raw_text(segment_nodes),
        embedding=tuple(float(x) for x in embedding),
        created_at=working.logical_clock,
        source_archive_id=archive_id,
    )
    working = insert_topic_node(working, node, edges)
    committed = replace(working, state=EngineState.EPISODIC_BUFFERING)

    tokens_in, tokens_out = providers.call_log.token_totals(log_start)
    report = ConsolidationReport(
        new_topic_id=new_id,
        archive_id=archive_id,
        candidate_pool=tuple(candidates),
        scored_relations=tuple(scored),
        accepted_edges=len(edges),
        forced=forced,
        elapsed=time.perf_counter() - started,
        provider_tokens={"input": tokens_in, "output": tokens_out},
        skipped_candidates=tuple(skipped),
        entailment_defaults=entailment_defaults,
    )
    return report, committed


def apply_verdict(
    snapshot: MemorySnapshot,
    verdict: BoundaryVerdict,
    providers: ProviderBundle,
) -> tuple[list[ConsolidationReport], MemorySnapshot]:
    """Consolidate each maximal segment a verdict identifies, in order.

    Content after the last split stays buffered; a forced verdict consumes
    the whole buffer.  If a segment aborts, earlier committed segments stay
    committed and the remaining buffer is retained untouched.
    """
    if not verdict.boundary_detected:
        return [], snapshot
    reports = []
    consumed = -1
    for split in verdict.split_indices:
        # Splits are positions in the original buffer; each consumed prefix
        # shifts the remaining indices left.
        length = split - consumed
        segment = snapshot.buffer[:length]
        try:
            report, snapshot = consolidate_segment(
                snapshot, segment, providers, forced=verdict.forced
            )
        except ConsolidationError as exc:
            logger.warning("segment consolidation aborted, buffer retained: %s", exc)
            break
        reports.append(report)
        consumed = split
    return reports, snapshot
