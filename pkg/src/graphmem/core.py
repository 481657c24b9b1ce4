"""Two-layer graph memory state and the structural mutations over it.

A snapshot combines four parts: the topic graph of consolidated themes, the
active event buffer holding the live episode, frozen archives of past
episodes, and a cross-layer index tying each theme to the archive it was
built from.  Every mutation is functional: operations return a new snapshot
and never modify their input, which is what makes transactional
consolidation and concurrent reads cheap to reason about.

Identifiers are engine-generated, zero-padded and monotonic ("e000007",
"t000002", "a000003") so that lexicographic order equals creation order and
replays are byte-stable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .config import EngineConfig, estimate_tokens
from .errors import StateError

_ID_WIDTH = 6
LIVE_BUFFER_ID = "live"
SEQUENTIAL = "sequential"


class EngineState(Enum):
    EPISODIC_BUFFERING = "episodic_buffering"
    SEMANTIC_CONSOLIDATION = "semantic_consolidation"


class Relation(str, Enum):
    """Storable edge labels; ``unrelated`` pairs never become edges."""

    SUPPORT = "support"
    CONTRADICT = "contradict"
    COREFERENCE = "coreference"
    CAUSAL = "causal"
    SEMANTIC = "semantic"


#: Scorer vocabulary includes this label, but it is never stored as an edge.
UNRELATED = "unrelated"

#: Labels whose edges keep their orientation (new node -> candidate).
DIRECTED_RELATIONS = frozenset({Relation.SUPPORT, Relation.CONTRADICT, Relation.CAUSAL})


@dataclass(frozen=True)
class EventNode:
    """One utterance in an episode."""

    id: str
    session_id: str
    turn_index: int
    speaker: str
    text: str
    timestamp: str | None
    token_count: int
    confidence_flag: bool = True


@dataclass(frozen=True)
class Utterance:
    """Raw input to :func:`append_event` before an id is assigned."""

    session_id: str
    speaker: str
    text: str
    timestamp: str | None = None
    turn_index: int | None = None


@dataclass(frozen=True)
class EventGraph:
    """Append-only utterance graph; sequential edges form a single path."""

    graph_id: str
    nodes: tuple[EventNode, ...] = ()
    edges: tuple[tuple[str, str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def token_total(self) -> int:
        return sum(n.token_count for n in self.nodes)

    def to_dict(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "nodes": [_event_node_dict(n) for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class TopicNode:
    """Consolidated theme holding both an abstract summary and verbatim text."""

    id: str
    summary: str
    keywords: tuple[str, ...]
    raw: str
    embedding: tuple[float, ...]
    created_at: int
    source_archive_id: str


@dataclass(frozen=True)
class TopicEdge:
    from_id: str
    to_id: str
    relation: Relation
    weight: float
    directed: bool


@dataclass(frozen=True)
class TopicGraph:
    """Theme graph; at most one edge per unordered node pair."""

    nodes: Mapping[str, TopicNode] = field(default_factory=dict)
    edges: Mapping[tuple[str, str], TopicEdge] = field(default_factory=dict)

    def edge_list(self) -> list[TopicEdge]:
        return [self.edges[k] for k in sorted(self.edges)]


def edge_key(a: str, b: str) -> tuple[str, str]:
    """Canonical unordered-pair key for edge deduplication."""
    return (a, b) if a <= b else (b, a)


def raw_text(nodes: Sequence[EventNode]) -> str:
    """Role-attributed verbatim rendering of an episode, one line per node."""
    return "".join(f"\n{n.speaker}: {n.text}" for n in nodes)


@dataclass(frozen=True)
class MemorySnapshot:
    """Composite memory state; see the module docstring for the layout."""

    config: EngineConfig
    topic_graph: TopicGraph = field(default_factory=TopicGraph)
    active_event_graph: EventGraph = field(
        default_factory=lambda: EventGraph(LIVE_BUFFER_ID)
    )
    archive: Mapping[str, EventGraph] = field(default_factory=dict)
    cross_index: Mapping[str, str] = field(default_factory=dict)
    state: EngineState = EngineState.EPISODIC_BUFFERING
    logical_clock: int = 0

    @property
    def buffer(self) -> tuple[EventNode, ...]:
        return self.active_event_graph.nodes


def new_snapshot(config: EngineConfig | None = None) -> MemorySnapshot:
    return MemorySnapshot(config=config or EngineConfig())


# ---------------------------------------------------------------------------
# id allocation


def _numeric_suffix(identifier: str) -> int:
    return int(identifier[1:])


def _format_id(prefix: str, counter: int) -> str:
    return f"{prefix}{counter:0{_ID_WIDTH}d}"


def _all_event_ids(snapshot: MemorySnapshot) -> Iterable[str]:
    for node in snapshot.active_event_graph.nodes:
        yield node.id
    for graph in snapshot.archive.values():
        for node in graph.nodes:
            yield node.id


def next_event_id(snapshot: MemorySnapshot) -> str:
    highest = max((_numeric_suffix(i) for i in _all_event_ids(snapshot)), default=0)
    return _format_id("e", highest + 1)


def next_topic_id(snapshot: MemorySnapshot) -> str:
    highest = max(
        (_numeric_suffix(i) for i in snapshot.topic_graph.nodes), default=0
    )
    return _format_id("t", highest + 1)


def next_archive_id(snapshot: MemorySnapshot) -> str:
    highest = max((_numeric_suffix(i) for i in snapshot.archive), default=0)
    return _format_id("a", highest + 1)


# ---------------------------------------------------------------------------
# structural mutations


def append_event(snapshot: MemorySnapshot, utterance: Utterance) -> MemorySnapshot:
    """Append one utterance to the live buffer.

    The topic layer, archives and cross index are shared with the input
    snapshot unchanged; only the buffer and the logical clock move.
    """
    if snapshot.state is not EngineState.EPISODIC_BUFFERING:
        raise StateError("append_event during consolidation transaction")
    if not utterance.text.strip():
        raise ValueError("utterance text must be non-empty")

    turn_index = utterance.turn_index
    if turn_index is None:
        turn_index = _derive_turn_index(snapshot, utterance.session_id)
    elif turn_index < 0:
        raise ValueError("turn_index must be non-negative")

    node = EventNode(
        id=next_event_id(snapshot),
        session_id=utterance.session_id,
        turn_index=turn_index,
        speaker=utterance.speaker,
        text=utterance.text,
        timestamp=utterance.timestamp,
        token_count=estimate_tokens(utterance.text),
    )
    buffer = snapshot.active_event_graph
    edges = buffer.edges
    if buffer.nodes:
        edges = edges + ((buffer.nodes[-1].id, node.id, SEQUENTIAL),)
    new_buffer = EventGraph(buffer.graph_id, buffer.nodes + (node,), edges)
    return replace(
        snapshot,
        active_event_graph=new_buffer,
        logical_clock=snapshot.logical_clock + 1,
    )


def _derive_turn_index(snapshot: MemorySnapshot, session_id: str) -> int:
    seen = [
        n.turn_index
        for n in snapshot.active_event_graph.nodes
        if n.session_id == session_id
    ]
    for graph in snapshot.archive.values():
        seen.extend(n.turn_index for n in graph.nodes if n.session_id == session_id)
    return max(seen, default=-1) + 1


def archive_segment(
    snapshot: MemorySnapshot,
    length: int,
    confidence_flags: Sequence[bool] | None = None,
) -> tuple[str, MemorySnapshot]:
    """Freeze the first ``length`` buffered nodes into a new archive entry.

    Only the consolidation transaction may call this; the buffer keeps its
    suffix and the frozen graph takes the fresh archive id as its graph id.
    ``confidence_flags`` are the per-node self-consistency results stamped at
    freeze time.
    """
    if snapshot.state is not EngineState.SEMANTIC_CONSOLIDATION:
        raise StateError("archive outside a consolidation transaction")
    buffer = snapshot.active_event_graph
    if not buffer.nodes:
        raise StateError("archive of an empty buffer")
    if not 1 <= length <= len(buffer.nodes):
        raise ValueError(f"segment length {length} out of range")
    if confidence_flags is not None and len(confidence_flags) != length:
        raise ValueError("confidence_flags length mismatch")

    archive_id = next_archive_id(snapshot)
    frozen_nodes = buffer.nodes[:length]
    if confidence_flags is not None:
        frozen_nodes = tuple(
            replace(n, confidence_flag=bool(flag))
            for n, flag in zip(frozen_nodes, confidence_flags)
        )
    frozen_ids = {n.id for n in frozen_nodes}
    frozen = EventGraph(
        archive_id,
        frozen_nodes,
        tuple(e for e in buffer.edges if e[0] in frozen_ids and e[1] in frozen_ids),
    )
    rest_nodes = buffer.nodes[length:]
    rest_ids = {n.id for n in rest_nodes}
    rest = EventGraph(
        buffer.graph_id,
        rest_nodes,
        tuple(e for e in buffer.edges if e[0] in rest_ids and e[1] in rest_ids),
    )
    new_archive = dict(snapshot.archive)
    new_archive[archive_id] = frozen
    return archive_id, replace(
        snapshot,
        active_event_graph=rest,
        archive=new_archive,
        logical_clock=snapshot.logical_clock + 1,
    )


def archive_buffer(snapshot: MemorySnapshot) -> tuple[str, MemorySnapshot]:
    """Freeze the whole buffer and reset it to empty."""
    return archive_segment(snapshot, len(snapshot.active_event_graph.nodes))


def insert_topic_node(
    snapshot: MemorySnapshot,
    node: TopicNode,
    edges: Sequence[TopicEdge],
) -> MemorySnapshot:
    """Atomically add a theme plus its admitted edges and cross link.

    Rejects, before any mutation: duplicate node ids, edges not touching the
    new node, dangling endpoints, weights at or below the admission
    threshold, and source archives that do not exist.
    """
    graph = snapshot.topic_graph
    tau = snapshot.config.tau
    if node.id in graph.nodes:
        raise ValueError(f"duplicate topic node id {node.id}")
    if node.source_archive_id not in snapshot.archive:
        raise ValueError(f"source archive {node.source_archive_id} not found")
    for edge in edges:
        if node.id not in (edge.from_id, edge.to_id):
            raise ValueError(f"edge {edge.from_id}->{edge.to_id} does not touch {node.id}")
        other = edge.to_id if edge.from_id == node.id else edge.from_id
        if other not in graph.nodes:
            raise ValueError(f"dangling edge endpoint {other}")
        if edge.weight <= tau:
            raise ValueError(f"edge weight {edge.weight} <= tau {tau}")

    new_edges = dict(graph.edges)
    for edge in edges:
        key = edge_key(edge.from_id, edge.to_id)
        current = new_edges.get(key)
        # One edge per unordered pair; a rescored relation only wins with a
        # strictly higher weight.
        if current is None or edge.weight > current.weight:
            new_edges[key] = edge
    new_nodes = dict(graph.nodes)
    new_nodes[node.id] = node
    new_cross = dict(snapshot.cross_index)
    new_cross[node.id] = node.source_archive_id
    return replace(
        snapshot,
        topic_graph=TopicGraph(new_nodes, new_edges),
        cross_index=new_cross,
        logical_clock=snapshot.logical_clock + 1,
    )


def neighbors(topic_graph: TopicGraph, node_id: str) -> set[str]:
    """All nodes sharing an edge with ``node_id``, ignoring direction."""
    if node_id not in topic_graph.nodes:
        raise ValueError(f"unknown topic node {node_id}")
    found = set()
    for a, b in topic_graph.edges:
        if a == node_id:
            found.add(b)
        elif b == node_id:
            found.add(a)
    return found


# ---------------------------------------------------------------------------
# canonical serialization


def _event_node_dict(node: EventNode) -> dict:
    return {
        "id": node.id,
        "session_id": node.session_id,
        "turn_index": node.turn_index,
        "speaker": node.speaker,
        "text": node.text,
        "timestamp": node.timestamp,
        "token_count": node.token_count,
        "confidence_flag": node.confidence_flag,
    }


def _topic_node_dict(node: TopicNode) -> dict:
    return {
        "id": node.id,
        "summary": node.summary,
        "keywords": list(node.keywords),
        "raw": node.raw,
        "embedding": [float(x) for x in node.embedding],
        "created_at": node.created_at,
        "source_archive_id": node.source_archive_id,
    }


def _topic_edge_dict(edge: TopicEdge) -> dict:
    return {
        "from_id": edge.from_id,
        "to_id": edge.to_id,
        "relation": edge.relation.value,
        "weight": float(edge.weight),
        "directed": edge.directed,
    }


def snapshot_to_dict(snapshot: MemorySnapshot) -> dict:
    """Plain-type document with the canonical top-level keys.

    The transient state flag is not part of the document: a snapshot at rest
    is always buffering.
    """
    graph = snapshot.topic_graph
    return {
        "topic_nodes": [
            _topic_node_dict(graph.nodes[k]) for k in sorted(graph.nodes)
        ],
        "topic_edges": [_topic_edge_dict(e) for e in graph.edge_list()],
        "archives": {k: v.to_dict() for k, v in snapshot.archive.items()},
        "cross_index": dict(snapshot.cross_index),
        "active_buffer": snapshot.active_event_graph.to_dict(),
        "config": snapshot.config.to_dict(),
        "logical_clock": snapshot.logical_clock,
    }


def canonical_json(document: dict) -> bytes:
    """Key-sorted, separator-fixed encoding: equal documents, equal bytes."""
    return json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8")


def snapshot_bytes(snapshot: MemorySnapshot) -> bytes:
    return canonical_json(snapshot_to_dict(snapshot))


def snapshot_hash(snapshot: MemorySnapshot) -> str:
    return hashlib.sha256(snapshot_bytes(snapshot)).hexdigest()


def stable_layer_hash(snapshot: MemorySnapshot) -> str:
    """Hash of everything appends must not touch: themes, archives, index."""
    doc = snapshot_to_dict(snapshot)
    stable = {
        k: doc[k] for k in ("topic_nodes", "topic_edges", "archives", "cross_index")
    }
    return hashlib.sha256(canonical_json(stable)).hexdigest()
