"""Model-facing interfaces plus the deterministic mock implementations.

The mock providers are the test substrate: pure functions of their inputs
and the config seed, so any two runs produce identical call logs and
identical downstream snapshots.  Real model backends plug in through the
same protocols (see :mod:`graphmem.http`).
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .config import EngineConfig, estimate_tokens
from .core import UNRELATED, EventNode, Relation

_WORD_RE = re.compile(r"[a-z0-9]+")

#: Small closed stopword list for keyword/divergence mocks.  Content words
#: are whatever survives this filter.
STOPWORDS = frozenset(
    """a an the and or but if then so of to in on at for with from by as is are
    was were be been being am do does did have has had will would can could
    should not no yes it its this that these those i you he she we they me him
    her us them my your his our their what which who whom when where how why
    about""".split()
)


def words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def content_words(text: str) -> set[str]:
    return {w for w in words(text) if w not in STOPWORDS and len(w) > 1}


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


# ---------------------------------------------------------------------------
# protocols


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class BoundaryDiscriminator(Protocol):
    def detect(self, utterances: Sequence[EventNode]) -> list[int]: ...


class Summarizer(Protocol):
    def summarize(self, content: str) -> "SummaryResult": ...


class RelationScorer(Protocol):
    def score(self, first: str, second: str) -> tuple[str, float]: ...


class RelevanceScorer(Protocol):
    def score(self, query: str, text: str) -> float: ...


class EntailmentChecker(Protocol):
    def entails(self, summary: str, text: str) -> bool: ...


@dataclass(frozen=True)
class SummaryResult:
    keywords: tuple[str, ...]
    summary: str


# ---------------------------------------------------------------------------
# call log


@dataclass(frozen=True)
class CallRecord:
    provider: str
    input_tokens: int
    output_tokens: int
    elapsed: float


class CallLog:
    """Append-only, thread-safe record of every provider invocation."""

    def __init__(self) -> None:
        self._entries: list[CallRecord] = []
        self._lock = threading.Lock()

    def record(
        self, provider: str, input_tokens: int, output_tokens: int, elapsed: float = 0.0
    ) -> None:
        with self._lock:
            self._entries.append(
                CallRecord(provider, input_tokens, output_tokens, elapsed)
            )

    def entries(self) -> tuple[CallRecord, ...]:
        with self._lock:
            return tuple(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def count(self, provider: str) -> int:
        return sum(1 for e in self.entries() if e.provider == provider)

    def token_totals(self, start: int = 0) -> tuple[int, int]:
        entries = self.entries()[start:]
        return (
            sum(e.input_tokens for e in entries),
            sum(e.output_tokens for e in entries),
        )


@dataclass(frozen=True)
class UsageSummary:
    tokens_per_query: float
    mean_latency: float


def record_usage(call_log: CallLog, queries: int) -> UsageSummary:
    """Fold the call log into per-query token and latency figures."""
    entries = call_log.entries()
    if queries <= 0 or not entries:
        return UsageSummary(0.0, 0.0)
    total_tokens = sum(e.input_tokens + e.output_tokens for e in entries)
    total_elapsed = sum(e.elapsed for e in entries)
    return UsageSummary(total_tokens / queries, total_elapsed / queries)


# ---------------------------------------------------------------------------
# mock providers


class MockEmbedder:
    """Hashed bag-of-words embedder.

    Tokens are lowercased, punctuation-stripped, hashed into ``dim`` buckets
    with a +/-1 sign from a second hash, then L2-normalized.  Text with no
    tokens (and the measure-zero case of full cancellation) maps to the first
    basis vector.
    """

    name = "embedder"

    def __init__(self, dim: int = 64, seed: int = 0, call_log: CallLog | None = None):
        self.dim = dim
        self.seed = seed
        self.call_log = call_log

    def _bucket(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(
            f"{self.seed}:{token}".encode(), digest_size=8
        ).digest()
        bucket = int.from_bytes(digest[:4], "big") % self.dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        return bucket, sign

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in words(text):
            bucket, sign = self._bucket(token)
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            vec = np.zeros(self.dim)
            vec[0] = 1.0
        else:
            vec = vec / norm
        if self.call_log is not None:
            self.call_log.record(self.name, estimate_tokens(text), 0)
        return vec


class MockBoundaryDiscriminator:
    """Keyword-divergence rule: a boundary sits between adjacent utterances
    whose content-word sets overlap at or below ``divergence_threshold``."""

    name = "discriminator"

    def __init__(
        self, divergence_threshold: float = 0.0, call_log: CallLog | None = None
    ):
        self.divergence_threshold = divergence_threshold
        self.call_log = call_log

    def detect(self, utterances: Sequence[EventNode]) -> list[int]:
        boundaries = []
        for i in range(len(utterances) - 1):
            overlap = jaccard(
                content_words(utterances[i].text),
                content_words(utterances[i + 1].text),
            )
            if overlap <= self.divergence_threshold:
                boundaries.append(i)
        if self.call_log is not None:
            input_tokens = sum(n.token_count for n in utterances)
            self.call_log.record(self.name, input_tokens, len(boundaries) + 2)
        return boundaries


class MockSummarizer:
    """Keyword-frequency summarizer over utterance content.

    Role-attributed lines ("speaker: text") are stripped to their text so
    speaker names never crowd out topical words.  The eight most frequent
    content words (count desc, then alphabetical) become the keywords, and
    all of them appear in the one-sentence summary.
    """

    name = "summarizer"

    def __init__(self, call_log: CallLog | None = None):
        self.call_log = call_log

    def summarize(self, content: str) -> SummaryResult:
        counts: dict[str, int] = {}
        for line in content.split("\n"):
            _speaker, sep, rest = line.partition(": ")
            text = rest if sep else line
            for w in words(text):
                if w in STOPWORDS or len(w) <= 1:
                    continue
                counts[w] = counts.get(w, 0) + 1
        ranked = sorted(counts, key=lambda w: (-counts[w], w))
        keywords = tuple(ranked[:8])
        summary = (
            "Conversation about " + ", ".join(keywords) + "."
            if keywords
            else "Empty conversation."
        )
        if self.call_log is not None:
            self.call_log.record(
                self.name,
                estimate_tokens(content),
                estimate_tokens(summary) + len(keywords),
            )
        return SummaryResult(keywords, summary)


class MockRelationScorer:
    """Exact match -> coreference/1.0; partial content overlap -> semantic
    weighted by Jaccard; anything else -> unrelated/0."""

    name = "relation_scorer"

    def __init__(self, call_log: CallLog | None = None):
        self.call_log = call_log

    def score(self, first: str, second: str) -> tuple[str, float]:
        if first == second:
            result = (Relation.COREFERENCE.value, 1.0)
        else:
            overlap = jaccard(content_words(first), content_words(second))
            if 0.0 < overlap < 1.0:
                result = (Relation.SEMANTIC.value, overlap)
            else:
                result = (UNRELATED, 0.0)
        if self.call_log is not None:
            self.call_log.record(
                self.name, estimate_tokens(first) + estimate_tokens(second), 3
            )
        return result


class MockRelevanceScorer:
    """Token-level Jaccard floored at 0.01 so every candidate stays boostable."""

    name = "relevance_scorer"

    def __init__(self, call_log: CallLog | None = None):
        self.call_log = call_log

    def score(self, query: str, text: str) -> float:
        value = max(jaccard(set(words(query)), set(words(text))), 0.01)
        if self.call_log is not None:
            self.call_log.record(
                self.name, estimate_tokens(query) + estimate_tokens(text), 1
            )
        return value


class MockEntailmentChecker:
    """A summary entails an utterance iff they share a content word."""

    name = "entailment"

    def __init__(self, call_log: CallLog | None = None):
        self.call_log = call_log

    def entails(self, summary: str, text: str) -> bool:
        result = bool(content_words(summary) & content_words(text))
        if self.call_log is not None:
            self.call_log.record(
                self.name, estimate_tokens(summary) + estimate_tokens(text), 1
            )
        return result


# ---------------------------------------------------------------------------
# bundle


@dataclass
class ProviderBundle:
    """The model-facing surface of the engine plus its shared call log.

    ``time_classifier`` and ``answer_synthesizer`` are optional hooks; when
    absent the retrieval path falls back to its regex rule and the evaluation
    harness skips answer-overlap metrics.
    """

    embedder: Embedder
    discriminator: BoundaryDiscriminator
    summarizer: Summarizer
    relation_scorer: RelationScorer
    relevance_scorer: RelevanceScorer
    entailment: EntailmentChecker
    call_log: CallLog = field(default_factory=CallLog)
    time_classifier: Callable[[str], bool] | None = None
    answer_synthesizer: Callable[[str, Sequence[str]], str] | None = None


def mock_bundle(config: EngineConfig | None = None) -> ProviderBundle:
    """Fully deterministic bundle driven only by inputs and the config seed."""
    cfg = config or EngineConfig()
    log = CallLog()
    return ProviderBundle(
        embedder=MockEmbedder(cfg.embedding_dim, cfg.seed, log),
        discriminator=MockBoundaryDiscriminator(call_log=log),
        summarizer=MockSummarizer(log),
        relation_scorer=MockRelationScorer(log),
        relevance_scorer=MockRelevanceScorer(log),
        entailment=MockEntailmentChecker(log),
        call_log=log,
    )
