from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import InvalidConfig
from .llm.codec import TokenCodec
from .model import Document, TextChunk, content_id


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size_tokens: int = 600
    overlap_tokens: int = 100

    def __post_init__(self) -> None:
        if not (self.chunk_size_tokens > self.overlap_tokens >= 0):
            raise InvalidConfig(
                f"need chunk_size > overlap >= 0, got {self.chunk_size_tokens}/{self.overlap_tokens}"
            )

    @property
    def stride(self) -> int:
        return self.chunk_size_tokens - self.overlap_tokens


def expected_chunk_count(n_tokens: int, cfg: ChunkingConfig) -> int:
    return max(1, math.ceil((n_tokens - cfg.overlap_tokens) / cfg.stride))


def chunk_document(doc: Document, cfg: ChunkingConfig, codec: TokenCodec) -> list[TextChunk]:
    """Fixed-stride token windows; the last window may be short."""
    tokens = codec.encode(doc.text)
    if not tokens:
        raise InvalidConfig(f"document {doc.title!r} has no tokens")
    chunks = []
    for i in range(expected_chunk_count(len(tokens), cfg)):
        start = i * cfg.stride
        window = tokens[start : start + cfg.chunk_size_tokens]
        text = codec.decode(window)
        chunks.append(
            TextChunk(
                id=content_id("chunk", doc.id, i, text),
                document_id=doc.id,
                index_in_document=i,
                text=text,
                token_count=len(window),
                overlap_tokens=cfg.overlap_tokens if i else 0,
                start_token=start,
            )
        )
    return chunks


def chunk_corpus(docs: Iterable[Document], cfg: ChunkingConfig, codec: TokenCodec) -> list[TextChunk]:
    out: list[TextChunk] = []
    for doc in docs:
        out.extend(chunk_document(doc, cfg, codec))
    return out
