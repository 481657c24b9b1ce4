"""Snapshot persistence and the exact-scan vector index.

Files are single JSON documents: the canonical snapshot body plus a
``format_version`` and a ``content_hash`` header over the body, so equal
snapshots produce byte-equal files and any corruption is named on load.
The vector index is a plain exhaustive cosine scan; at the intended scale
(hundreds of themes) the scan is both the implementation and the oracle.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .config import EngineConfig, estimate_tokens
from .core import (
    EventGraph,
    EventNode,
    LIVE_BUFFER_ID,
    MemorySnapshot,
    Relation,
    SEQUENTIAL,
    TopicEdge,
    TopicGraph,
    TopicNode,
    canonical_json,
    edge_key,
    raw_text,
    snapshot_to_dict,
)
from .errors import CorruptionError

FORMAT_VERSION = "1.0"


# ---------------------------------------------------------------------------
# exact vector search


@dataclass
class VectorIndex:
    """Exhaustive cosine index over unit vectors, ties broken by smaller id."""

    ids: list[str]
    matrix: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "VectorIndex":
        return cls([], np.zeros((0, dim)))

    @classmethod
    def from_topic_graph(cls, graph: TopicGraph, dim: int) -> "VectorIndex":
        ids = sorted(graph.nodes)
        if not ids:
            return cls.empty(dim)
        matrix = np.array([graph.nodes[i].embedding for i in ids], dtype=float)
        return cls(ids, matrix)

    def add(self, node_id: str, vector: np.ndarray) -> None:
        """Incremental maintenance path; must stay equal to a full rebuild."""
        position = bisect.bisect_left(self.ids, node_id)
        self.ids.insert(position, node_id)
        self.matrix = np.insert(self.matrix, position, np.asarray(vector, float), axis=0)

    def __len__(self) -> int:
        return len(self.ids)


def vector_topk(
    index: VectorIndex, query_vector: np.ndarray, k: int
) -> list[tuple[str, float]]:
    """Exact top-k by cosine over unit vectors, descending, ties by id.

    Fewer than ``k`` entries returns everything.  Similarities are computed
    per row so the arithmetic matches any straightforward scan bit for bit.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.ids:
        return []
    query = np.asarray(query_vector, dtype=float)
    scored = [
        (node_id, float(np.dot(index.matrix[i], query)))
        for i, node_id in enumerate(index.ids)
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


# ---------------------------------------------------------------------------
# save / load


def save(snapshot: MemorySnapshot, path: str | os.PathLike) -> None:
    """Write the canonical document atomically (temp file + rename)."""
    body = snapshot_to_dict(snapshot)
    document = dict(body)
    document["format_version"] = FORMAT_VERSION
    document["content_hash"] = hashlib.sha256(canonical_json(body)).hexdigest()
    payload = canonical_json(document)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, temp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(temp_path, path)
    except OSError:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise


def load(path: str | os.PathLike) -> MemorySnapshot:
    """Read and fully validate a snapshot; violations raise named errors."""
    with open(path, "rb") as handle:
        raw = handle.read()
    try:
        document = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptionError("well-formed-json", str(exc)) from exc
    if not isinstance(document, dict):
        raise CorruptionError("document-is-object")
    try:
        return _reconstruct(document)
    except CorruptionError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError, IndexError) as exc:
        raise CorruptionError("document-schema", repr(exc)) from exc


def _reconstruct(document: dict) -> MemorySnapshot:
    version = document.get("format_version")
    if not isinstance(version, str) or "." not in version:
        raise CorruptionError("format-version-present")
    major = version.split(".", 1)[0]
    if major != FORMAT_VERSION.split(".", 1)[0]:
        raise CorruptionError("format-version-known", f"major version {major}")

    body_keys = (
        "topic_nodes",
        "topic_edges",
        "archives",
        "cross_index",
        "active_buffer",
        "config",
        "logical_clock",
    )
    body = {}
    for key in body_keys:
        if key not in document:
            raise CorruptionError("body-keys-present", key)
        body[key] = document[key]
    recorded = document.get("content_hash")
    actual = hashlib.sha256(canonical_json(body)).hexdigest()
    if recorded != actual:
        raise CorruptionError("content-hash-match")

    config = EngineConfig.from_dict(body["config"])
    topic_nodes = {}
    for entry in body["topic_nodes"]:
        node = TopicNode(
            id=entry["id"],
            summary=entry["summary"],
            keywords=tuple(entry["keywords"]),
            raw=entry["raw"],
            embedding=tuple(float(x) for x in entry["embedding"]),
            created_at=int(entry["created_at"]),
            source_archive_id=entry["source_archive_id"],
        )
        if node.id in topic_nodes:
            raise CorruptionError("topic-id-unique", node.id)
        topic_nodes[node.id] = node

    edges = {}
    for entry in body["topic_edges"]:
        edge = TopicEdge(
            from_id=entry["from_id"],
            to_id=entry["to_id"],
            relation=Relation(entry["relation"]),
            weight=float(entry["weight"]),
            directed=bool(entry["directed"]),
        )
        key = edge_key(edge.from_id, edge.to_id)
        if key in edges:
            raise CorruptionError("edge-pair-unique", str(key))
        edges[key] = edge

    archives = {
        archive_id: _rebuild_graph(graph_dict)
        for archive_id, graph_dict in body["archives"].items()
    }
    buffer = _rebuild_graph(body["active_buffer"])
    clock = body["logical_clock"]
    if not isinstance(clock, int) or clock < 0:
        raise CorruptionError("logical-clock-non-negative")

    snapshot = MemorySnapshot(
        config=config,
        topic_graph=TopicGraph(topic_nodes, edges),
        active_event_graph=buffer,
        archive=archives,
        cross_index=dict(body["cross_index"]),
        logical_clock=clock,
    )
    validate_snapshot(snapshot)
    return snapshot


def _rebuild_graph(graph_dict: dict) -> EventGraph:
    nodes = tuple(
        EventNode(
            id=entry["id"],
            session_id=entry["session_id"],
            turn_index=int(entry["turn_index"]),
            speaker=entry["speaker"],
            text=entry["text"],
            timestamp=entry["timestamp"],
            token_count=int(entry["token_count"]),
            confidence_flag=bool(entry["confidence_flag"]),
        )
        for entry in graph_dict["nodes"]
    )
    edges = tuple((e[0], e[1], e[2]) for e in graph_dict["edges"])
    return EventGraph(graph_dict["graph_id"], nodes, edges)


def validate_snapshot(snapshot: MemorySnapshot) -> None:
    """Check every structural invariant, naming the first one that fails."""
    config = snapshot.config
    seen_events: set[str] = set()
    for graph_name, graph in [("active_buffer", snapshot.active_event_graph)] + [
        (f"archive {k}", v) for k, v in snapshot.archive.items()
    ]:
        node_ids = [n.id for n in graph.nodes]
        for node in graph.nodes:
            if node.id in seen_events:
                raise CorruptionError("event-id-unique", node.id)
            seen_events.add(node.id)
            if node.turn_index < 0:
                raise CorruptionError("turn-index-non-negative", node.id)
            if node.token_count != estimate_tokens(node.text):
                raise CorruptionError("token-count-matches-estimator", node.id)
        contained = set(node_ids)
        sequential = [e for e in graph.edges if e[2] == SEQUENTIAL]
        if len(sequential) != len(graph.edges):
            raise CorruptionError("event-edge-kind", graph_name)
        for src, dst, _ in graph.edges:
            if src not in contained or dst not in contained:
                raise CorruptionError("event-edge-endpoints", graph_name)
        expected = {
            (node_ids[i], node_ids[i + 1], SEQUENTIAL)
            for i in range(len(node_ids) - 1)
        }
        if set(graph.edges) != expected:
            raise CorruptionError("sequential-path", graph_name)

    for archive_id, graph in snapshot.archive.items():
        if not graph.nodes:
            raise CorruptionError("archive-non-empty", archive_id)
        if graph.graph_id != archive_id:
            raise CorruptionError("archive-graph-id", archive_id)
    if snapshot.active_event_graph.graph_id != LIVE_BUFFER_ID:
        raise CorruptionError("buffer-graph-id")

    graph = snapshot.topic_graph
    for node in graph.nodes.values():
        if len(node.embedding) != config.embedding_dim:
            raise CorruptionError("embedding-dim", node.id)
        norm = math.sqrt(sum(x * x for x in node.embedding))
        if abs(norm - 1.0) > 1e-6:
            raise CorruptionError("embedding-unit-norm", node.id)
        source = snapshot.archive.get(node.source_archive_id)
        if source is None:
            raise CorruptionError("source-archive-exists", node.id)
        if node.raw != raw_text(source.nodes):
            raise CorruptionError("raw-matches-archive", node.id)
    for key, edge in graph.edges.items():
        if key != edge_key(edge.from_id, edge.to_id):
            raise CorruptionError("edge-key-canonical", str(key))
        if edge.from_id not in graph.nodes or edge.to_id not in graph.nodes:
            raise CorruptionError("topic-edge-endpoints", str(key))
        if not edge.weight > config.tau:
            raise CorruptionError("edge-weight-above-tau", str(key))

    if set(snapshot.cross_index) != set(graph.nodes):
        raise CorruptionError("cross-index-covers-topics")
    targets = list(snapshot.cross_index.values())
    if len(targets) != len(set(targets)):
        raise CorruptionError("cross-index-injective")
    for topic_id, archive_id in snapshot.cross_index.items():
        if archive_id not in snapshot.archive:
            raise CorruptionError("cross-index-target-exists", archive_id)
        if graph.nodes[topic_id].source_archive_id != archive_id:
            raise CorruptionError("cross-index-matches-source", topic_id)
