"""Non-graph conditions: map-reduce over source chunks (TS) and plain
vector-retrieval RAG (SS)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import NoIndex, ProviderRejection
from .llm.gateway import LLMGateway
from .model import TextChunk
from .prompts import DEFAULT_PROMPTS, PromptSet
from .query import (
    BATCH_SEPARATOR,
    SOURCES_STYLE,
    GlobalAnswer,
    LedgerEntry,
    QueryConfig,
    Source,
    _validate_question,
    final_answer,
    map_reduce,
)


def ts_answer(
    question: str,
    chunks: Sequence[TextChunk],
    gw: LLMGateway,
    cfg: QueryConfig = QueryConfig(),
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> GlobalAnswer:
    sources = [Source(c.id, c.text) for c in chunks]
    return map_reduce(question, sources, gw, cfg, prompts, condition="ts")


def normalize(vector: Sequence[float]) -> tuple[float, ...]:
    norm = math.sqrt(math.fsum(x * x for x in vector))
    if norm == 0:
        raise ProviderRejection("cannot normalize a zero vector")
    return tuple(x / norm for x in vector)


def dot(a: Sequence[float], b: Sequence[float]) -> float:
    # fsum is correctly rounded, so the result does not depend on summation order
    return math.fsum(x * y for x, y in zip(a, b))


@dataclass
class StoreEntry:
    chunk_id: str
    vector: tuple[float, ...]
    token_count: int


@dataclass
class ChunkEmbeddingStore:
    entries: list[StoreEntry] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return len(self.entries[0].vector) if self.entries else 0

    def rank(self, query_vector: Sequence[float]) -> list[tuple[str, float]]:
        """Every chunk by cosine similarity (unit vectors, so a dot product),
        highest first; ties go to the smaller chunk id."""
        if self.entries and len(query_vector) != self.dimension:
            raise ProviderRejection(f"query vector has dimension {len(query_vector)}, store has {self.dimension}")
        scored = [(e.chunk_id, dot(query_vector, e.vector)) for e in self.entries]
        return sorted(scored, key=lambda s: (-s[1], s[0]))

    def to_records(self) -> list[dict]:
        return [{"chunk_id": e.chunk_id, "vector": list(e.vector), "token_count": e.token_count} for e in self.entries]

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "ChunkEmbeddingStore":
        return cls([StoreEntry(r["chunk_id"], tuple(r["vector"]), r["token_count"]) for r in records])


def build_embedding_store(chunks: Sequence[TextChunk], gw: LLMGateway, batch_size: int = 64) -> ChunkEmbeddingStore:
    if not chunks:
        raise NoIndex("no chunks to embed")
    batches = [chunks[i:i + batch_size] for i in range(0, len(chunks), batch_size)]
    vectors = gw.map(lambda b: gw.embed([c.text for c in b]), batches)
    entries = []
    for batch, vecs in zip(batches, vectors):
        for chunk, vec in zip(batch, vecs):
            entries.append(StoreEntry(chunk.id, normalize(vec), chunk.token_count))
    dims = {len(e.vector) for e in entries}
    if len(dims) > 1:
        raise ProviderRejection("embedding batches returned different dimensions")
    return ChunkEmbeddingStore(entries)


def ss_answer(
    question: str,
    store: ChunkEmbeddingStore,
    chunks: Sequence[TextChunk],
    gw: LLMGateway,
    context_limit_tokens: int = 8000,
    cfg: QueryConfig = QueryConfig(),
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> GlobalAnswer:
    """Retrieve the most similar chunks, fill the context window greedily
    and answer with one call."""
    question = _validate_question(question)
    if not store.entries:
        raise NoIndex("embedding store is empty")
    by_id = {c.id: c for c in chunks}
    query_vector = normalize(gw.embed([question])[0])
    codec = gw.codec
    parts: list[str] = []
    ledger: list[LedgerEntry] = []
    used = 0
    for chunk_id, _ in store.rank(query_vector):
        text = by_id[chunk_id].text
        cost = codec.count(text if not parts else BATCH_SEPARATOR + text)
        if used + cost > context_limit_tokens:
            break
        parts.append(text)
        ledger.append(LedgerEntry(chunk_id, None, codec.count(text)))
        used += cost
    context = BATCH_SEPARATOR.join(parts)
    while codec.count(context) > context_limit_tokens and parts:
        parts.pop()
        ledger.pop()
        context = BATCH_SEPARATOR.join(parts)
    text = final_answer(question, context, SOURCES_STYLE, gw, cfg, prompts)
    return GlobalAnswer(
        question,
        text,
        condition="ss",
        used=ledger,
        reduce_calls=1,
        final_context_tokens=codec.count(context),
    )
