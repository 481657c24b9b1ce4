"""Replay, evaluation and protocol-reproduction harness.

Feeds dialogue corpora through the engine under interchangeable partitioning
strategies, evaluates QA retrieval with token-overlap metrics, injects
segmentation noise, and emits scaling telemetry.  Strategies only move the
consolidation cut points; ingestion, consolidation internals and the
retrieval path are identical across all of them.

Corpus wire format: JSON-lines, one turn per line with fields
``session_id``, ``turn_index``, ``speaker``, ``text`` and optional
``timestamp``; QA items live in a sibling JSONL file with ``question``,
``gold_answer``, ``category`` and optional ``evidence_turn_ids`` referencing
turns as ``"<session_id>:<turn_index>"``.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .boundary import BoundaryVerdict, TriggerKind
from .consolidation import ConsolidationError, ConsolidationReport, consolidate_segment
from .core import MemorySnapshot, Utterance, append_event
from .engine import MemoryEngine
from .errors import GraphMemError
from .metrics import bleu1, recall_at_k, token_f1
from .providers import ProviderBundle
from .retrieval import Query, event_lookup, retrieve

logger = logging.getLogger(__name__)

CATEGORIES = ("single_hop", "multi_hop", "temporal", "open_domain")

STRATEGY_NAMES = (
    "semantic",
    "session",
    "fixed_window:256",
    "fixed_window:512",
    "fixed_turns:3",
    "fixed_turns:5",
)


# ---------------------------------------------------------------------------
# corpus


@dataclass(frozen=True)
class Turn:
    session_id: str
    turn_index: int
    speaker: str
    text: str
    timestamp: str | None = None

    @property
    def turn_id(self) -> str:
        return f"{self.session_id}:{self.turn_index}"


@dataclass(frozen=True)
class QAItem:
    question: str
    gold_answer: str
    category: str
    evidence_turn_ids: frozenset[str] = frozenset()


@dataclass(frozen=True)
class DialogueCorpus:
    turns: tuple[Turn, ...]
    qa: tuple[QAItem, ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for row, turn in enumerate(self.turns):
            if turn.turn_id in seen:
                raise ValueError(f"turn row {row}: duplicate id {turn.turn_id}")
            seen.add(turn.turn_id)
        for row, item in enumerate(self.qa):
            if item.category not in CATEGORIES:
                raise ValueError(f"qa row {row}: unknown category {item.category!r}")
            missing = item.evidence_turn_ids - seen
            if missing:
                raise ValueError(f"qa row {row}: unknown evidence {sorted(missing)}")

    @property
    def sessions(self) -> tuple[str, ...]:
        ordered: list[str] = []
        for turn in self.turns:
            if not ordered or ordered[-1] != turn.session_id:
                ordered.append(turn.session_id)
        return tuple(dict.fromkeys(ordered))


def load_corpus(turns_path: str | Path, qa_path: str | Path | None = None) -> DialogueCorpus:
    """Read the JSONL pair, rejecting malformed rows with their row number."""
    turns = []
    for row, payload in enumerate(_read_jsonl(turns_path)):
        try:
            turns.append(
                Turn(
                    session_id=str(payload["session_id"]),
                    turn_index=int(payload["turn_index"]),
                    speaker=str(payload["speaker"]),
                    text=str(payload["text"]),
                    timestamp=payload.get("timestamp"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{turns_path} row {row}: {exc!r}") from exc
    qa = []
    if qa_path is not None:
        for row, payload in enumerate(_read_jsonl(qa_path)):
            try:
                qa.append(
                    QAItem(
                        question=str(payload["question"]),
                        gold_answer=str(payload["gold_answer"]),
                        category=str(payload["category"]),
                        evidence_turn_ids=frozenset(
                            payload.get("evidence_turn_ids", [])
                        ),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{qa_path} row {row}: {exc!r}") from exc
    return DialogueCorpus(tuple(turns), tuple(qa))


def _read_jsonl(path: str | Path):
    with open(path, encoding="utf-8") as handle:
        for row, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path} row {row}: invalid JSON ({exc})") from exc
            if not isinstance(payload, dict):
                raise ValueError(f"{path} row {row}: expected an object")
            yield payload


def write_corpus(
    corpus: DialogueCorpus, turns_path: str | Path, qa_path: str | Path | None = None
) -> None:
    with open(turns_path, "w", encoding="utf-8") as handle:
        for turn in corpus.turns:
            record = {
                "session_id": turn.session_id,
                "turn_index": turn.turn_index,
                "speaker": turn.speaker,
                "text": turn.text,
            }
            if turn.timestamp is not None:
                record["timestamp"] = turn.timestamp
            handle.write(json.dumps(record, sort_keys=True) + "\n")
    if qa_path is not None:
        with open(qa_path, "w", encoding="utf-8") as handle:
            for item in corpus.qa:
                handle.write(
                    json.dumps(
                        {
                            "question": item.question,
                            "gold_answer": item.gold_answer,
                            "category": item.category,
                            "evidence_turn_ids": sorted(item.evidence_turn_ids),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


# ---------------------------------------------------------------------------
# segmentation noise


@dataclass(frozen=True)
class NoiseSpec:
    eta: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 0.4:
            raise ValueError("eta must lie in [0, 0.4]")


def perturb_boundaries(
    boundaries: Sequence[int],
    n_positions: int,
    eta: float,
    seed: int,
    delete_probability: float = 0.5,
) -> list[int]:
    """Simulate miss / shift / extra segmentation failures.

    Each boundary is perturbed with probability ``eta``: a fair coin picks
    deletion or a uniform shift from {-2, -1, +1, +2} clamped into range.
    Afterwards ``round(eta * len(boundaries))`` extra uniform cut points are
    inserted.  Only ``Random.random()`` draws are used, in a fixed order, so
    the stream is reproducible and easy to mirror in an oracle.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    rng = random.Random(seed)
    kept: list[int] = []
    for boundary in sorted(boundaries):
        if rng.random() < eta:
            if rng.random() < delete_probability:
                continue
            shift = (-2, -1, 1, 2)[int(rng.random() * 4)]
            kept.append(min(max(boundary + shift, 0), n_positions - 1))
        else:
            kept.append(boundary)
    extras = round(eta * len(boundaries))
    for _ in range(extras):
        kept.append(int(rng.random() * n_positions))
    return sorted(set(kept))


def inject_noise(
    boundaries: Sequence[int], spec: NoiseSpec, n_positions: int
) -> list[int]:
    return perturb_boundaries(boundaries, n_positions, spec.eta, spec.seed)


def _noise_transform(spec: NoiseSpec):
    def transform(verdict: BoundaryVerdict, buffer_len: int) -> BoundaryVerdict:
        if buffer_len < 2:
            return verdict
        perturbed = inject_noise(verdict.split_indices, spec, buffer_len - 1)
        return BoundaryVerdict(
            boundary_detected=bool(perturbed),
            split_indices=tuple(perturbed),
            degraded=verdict.degraded,
        )

    return transform


# ---------------------------------------------------------------------------
# replay


@dataclass
class ReplayTelemetry:
    turns: int = 0
    sessions: int = 0
    reports: list[ConsolidationReport] = field(default_factory=list)
    session_end_triggers: int = 0
    pause_triggers: int = 0
    overflow_triggers: int = 0
    manual_triggers: int = 0
    discriminator_calls: int = 0
    aborted_consolidations: int = 0

    @property
    def consolidations(self) -> int:
        return len(self.reports)


def parse_strategy(name: str) -> tuple[str, int | None]:
    """Split ``fixed_window:256`` style names into (kind, parameter)."""
    kind, _, param = name.partition(":")
    if kind in ("semantic", "session"):
        if param:
            raise ValueError(f"strategy {kind} takes no parameter")
        return kind, None
    if kind in ("fixed_window", "fixed_turns"):
        if not param.isdigit() or int(param) < 1:
            raise ValueError(f"strategy {kind} needs a positive integer parameter")
        return kind, int(param)
    raise ValueError(f"unknown strategy {name!r}")


def replay(
    corpus: DialogueCorpus,
    engine: MemoryEngine,
    strategy: str = "semantic",
    noise: NoiseSpec | None = None,
) -> tuple[MemorySnapshot, ReplayTelemetry]:
    """Feed the corpus through the engine under one partitioning strategy.

    The semantic strategy is the engine's own trigger loop (and the only one
    that consults the discriminator); the heuristic strategies consolidate
    whole buffers at their fixed cut points.
    """
    kind, param = parse_strategy(strategy)
    telemetry = ReplayTelemetry()
    discriminator_before = engine.providers.call_log.count("discriminator")

    if kind == "semantic":
        if noise is not None:
            engine.verdict_transform = _noise_transform(noise)
        for turn in corpus.turns:
            telemetry.reports.extend(
                engine.observe(
                    turn.session_id,
                    turn.speaker,
                    turn.text,
                    turn.timestamp,
                    turn.turn_index,
                )
            )
            telemetry.turns += 1
        telemetry.reports.extend(engine.end_session())
    else:
        snapshot = engine.snapshot
        last_session: str | None = None
        for turn in corpus.turns:
            if (
                kind == "session"
                and last_session is not None
                and turn.session_id != last_session
            ):
                snapshot = _consolidate_all(snapshot, engine, telemetry)
            snapshot = append_event(
                snapshot,
                Utterance(
                    turn.session_id,
                    turn.speaker,
                    turn.text,
                    turn.timestamp,
                    turn.turn_index,
                ),
            )
            telemetry.turns += 1
            last_session = turn.session_id
            buffered = snapshot.active_event_graph
            if kind == "fixed_turns" and len(buffered) >= param:
                snapshot = _consolidate_all(snapshot, engine, telemetry)
            elif kind == "fixed_window" and buffered.token_total >= param:
                snapshot = _consolidate_all(snapshot, engine, telemetry)
            elif buffered.token_total > snapshot.config.buffer_token_limit:
                snapshot = _consolidate_all(snapshot, engine, telemetry, forced=True)
        if kind == "session":
            snapshot = _consolidate_all(snapshot, engine, telemetry)
        engine.replace_snapshot(snapshot)

    telemetry.sessions = len(corpus.sessions)
    telemetry.session_end_triggers = engine.trigger_counts[TriggerKind.SESSION_END]
    telemetry.pause_triggers = engine.trigger_counts[TriggerKind.INTERACTION_PAUSE]
    telemetry.overflow_triggers = engine.trigger_counts[TriggerKind.BUFFER_OVERFLOW]
    telemetry.manual_triggers = engine.trigger_counts[TriggerKind.MANUAL]
    telemetry.discriminator_calls = (
        engine.providers.call_log.count("discriminator") - discriminator_before
    )
    return engine.snapshot, telemetry


def _consolidate_all(
    snapshot: MemorySnapshot,
    engine: MemoryEngine,
    telemetry: ReplayTelemetry,
    forced: bool = False,
) -> MemorySnapshot:
    if not snapshot.buffer:
        return snapshot
    try:
        report, snapshot = consolidate_segment(
            snapshot, snapshot.buffer, engine.providers, forced=forced
        )
    except ConsolidationError as exc:
        logger.warning("consolidation aborted during replay: %s", exc)
        telemetry.aborted_consolidations += 1
        return snapshot
    telemetry.reports.append(report)
    return snapshot


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalResult:
    items: int
    failed_items: int
    recall_at_k: float | None
    f1: float | None
    bleu1: float | None
    per_category: dict
    tokens_per_query: float
    mean_latency: float

    def to_dict(self) -> dict:
        return {
            "items": self.items,
            "failed_items": self.failed_items,
            "recall_at_k": self.recall_at_k,
            "f1": self.f1,
            "bleu1": self.bleu1,
            "per_category": self.per_category,
            "tokens_per_query": self.tokens_per_query,
            "mean_latency": self.mean_latency,
        }


def evaluate(
    corpus: DialogueCorpus,
    snapshot: MemorySnapshot,
    providers: ProviderBundle,
    k: int | None = None,
) -> EvalResult:
    """Run every QA item through retrieval and aggregate the metrics.

    Evidence recall@k is always computed when evidence ids exist; answer F1
    and BLEU-1 additionally require an answer synthesizer on the bundle.
    Per-item failures are logged, counted and excluded.  The snapshot is
    never mutated.
    """
    if k is None:
        k = snapshot.config.retrieval_k
    lookup = event_lookup(snapshot)
    log_start = len(providers.call_log)
    recalls: dict[str, list[float]] = {c: [] for c in CATEGORIES}
    f1s: dict[str, list[float]] = {c: [] for c in CATEGORIES}
    bleus: dict[str, list[float]] = {c: [] for c in CATEGORIES}
    failed = 0
    evaluated = 0

    for item in corpus.qa:
        try:
            ranked = retrieve(snapshot, Query(item.question), providers, k)
        except GraphMemError as exc:
            logger.warning("QA item failed, excluded: %s", exc)
            failed += 1
            continue
        evaluated += 1
        if item.evidence_turn_ids:
            retrieved_turns = [
                f"{lookup[c.event_node_id].session_id}:{lookup[c.event_node_id].turn_index}"
                for c in ranked
            ]
            recalls[item.category].append(
                recall_at_k(retrieved_turns, item.evidence_turn_ids)
            )
        if providers.answer_synthesizer is not None:
            contexts = [lookup[c.event_node_id].text for c in ranked]
            answer = providers.answer_synthesizer(item.question, contexts)
            f1s[item.category].append(token_f1(answer, item.gold_answer))
            bleus[item.category].append(bleu1(answer, item.gold_answer))

    usage = record_usage_window(providers, log_start, evaluated)
    per_category = {}
    for category in CATEGORIES:
        per_category[category] = {
            "count": len(recalls[category]) or len(f1s[category]),
            "recall_at_k": _mean(recalls[category]),
            "f1": _mean(f1s[category]),
            "bleu1": _mean(bleus[category]),
        }
    return EvalResult(
        items=evaluated,
        failed_items=failed,
        recall_at_k=_mean([v for vs in recalls.values() for v in vs]),
        f1=_mean([v for vs in f1s.values() for v in vs]),
        bleu1=_mean([v for vs in bleus.values() for v in vs]),
        per_category=per_category,
        tokens_per_query=usage[0],
        mean_latency=usage[1],
    )


def record_usage_window(
    providers: ProviderBundle, log_start: int, queries: int
) -> tuple[float, float]:
    entries = providers.call_log.entries()[log_start:]
    if queries <= 0 or not entries:
        return 0.0, 0.0
    tokens = sum(e.input_tokens + e.output_tokens for e in entries)
    elapsed = sum(e.elapsed for e in entries)
    return tokens / queries, elapsed / queries


def _mean(values: list[float]) -> float | None:
    if not values:
        return None
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# scaling telemetry


def scaling_report(
    corpus: DialogueCorpus,
    engine: MemoryEngine,
    checkpoints: Sequence[int],
) -> list[dict]:
    """Replay incrementally and snapshot growth plus query cost per checkpoint.

    The engine must start empty; it consumes sessions in order (a checkpoint
    flushes the pending session end first) and each row reports archived
    event nodes, theme count, total edge count, and per-query token cost
    over the corpus QA set.
    """
    if engine.snapshot.logical_clock != 0:
        raise ValueError("scaling_report needs a fresh engine")
    checkpoints = sorted(set(checkpoints))
    rows = []
    sessions_done = 0
    session_ids = list(corpus.sessions)
    turn_iter = iter(corpus.turns)
    pending = next(turn_iter, None)

    for session_id in session_ids:
        while pending is not None and pending.session_id == session_id:
            engine.observe(
                pending.session_id,
                pending.speaker,
                pending.text,
                pending.timestamp,
                pending.turn_index,
            )
            pending = next(turn_iter, None)
        sessions_done += 1
        if sessions_done in checkpoints:
            engine.end_session()
            rows.append(_checkpoint_row(engine, corpus, sessions_done))
    return rows


def _checkpoint_row(
    engine: MemoryEngine, corpus: DialogueCorpus, sessions_done: int
) -> dict:
    snapshot = engine.snapshot
    archived_events = sum(len(g) for g in snapshot.archive.values())
    sequential_edges = sum(len(g.edges) for g in snapshot.archive.values())
    edges = (
        len(snapshot.topic_graph.edges)
        + len(snapshot.cross_index)
        + sequential_edges
    )
    log_start = len(engine.providers.call_log)
    queries = 0
    for item in corpus.qa:
        retrieve(snapshot, Query(item.question), engine.providers)
        queries += 1
    tokens_per_query, latency = record_usage_window(
        engine.providers, log_start, queries
    )
    return {
        "sessions": sessions_done,
        "event_nodes": archived_events,
        "buffered": len(snapshot.buffer),
        "topic_nodes": len(snapshot.topic_graph.nodes),
        "edges": edges,
        "tokens_per_query": tokens_per_query,
        "latency": latency,
    }


# ---------------------------------------------------------------------------
# reports and criteria


def format_table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    """Aligned-column text table for terminal output."""
    def render(value) -> str:
        if isinstance(value, float):
            return f"{value:.4f}"
        if value is None:
            return "-"
        return str(value)

    table = [[render(row.get(c)) for c in columns] for row in rows]
    widths = [
        max(len(header), *(len(line[i]) for line in table)) if table else len(header)
        for i, header in enumerate(columns)
    ]
    lines = ["  ".join(h.ljust(w) for h, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for line in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)))
    return "\n".join(lines)


_OPS = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
}


def check_criteria(report: dict, criteria: Sequence[dict]) -> list[str]:
    """Evaluate threshold rules of the form {metric, op, value} against a
    report; ``metric`` is a dotted path into the report document."""
    violations = []
    for rule in criteria:
        path, op, target = rule["metric"], rule["op"], rule["value"]
        if op not in _OPS:
            raise ValueError(f"unknown op {op!r}")
        value = report
        try:
            for part in path.split("."):
                value = value[part]
        except (KeyError, TypeError):
            violations.append(f"{path}: missing from report")
            continue
        if value is None or not _OPS[op](value, target):
            violations.append(f"{path}: {value} not {op} {target}")
    return violations
