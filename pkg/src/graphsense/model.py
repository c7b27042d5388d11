"""Domain records shared across pipeline stages.

All records are frozen dataclasses; ``to_record``/``from_record`` give the
plain-dict form written to workspace stage files.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields
from datetime import date
from typing import Any, TypeVar

from .errors import EmptyName

T = TypeVar("T", bound="Record")


def content_id(prefix: str, *parts: object, length: int = 16) -> str:
    """Stable id from content; identical inputs always give identical ids."""
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode("utf-8", "surrogatepass"))
        h.update(b"\x00")
    return f"{prefix}-{h.hexdigest()[:length]}"


class Record:
    def to_record(self) -> dict[str, Any]:
        return asdict(self)  # type: ignore[call-overload]

    @classmethod
    def from_record(cls: type[T], data: dict[str, Any]) -> T:
        names = {f.name for f in fields(cls)}  # type: ignore[arg-type]
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass(frozen=True)
class Document(Record):
    id: str
    title: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"document {self.title!r} has no text")

    @classmethod
    def create(cls, title: str, text: str) -> "Document":
        return cls(id=content_id("doc", title, text), title=title, text=text)


@dataclass(frozen=True)
class TextChunk(Record):
    id: str
    document_id: str
    index_in_document: int
    text: str
    token_count: int
    overlap_tokens: int
    # position of the first token within the document's token stream
    start_token: int = 0


@dataclass(frozen=True)
class EntityInstance(Record):
    chunk_id: str
    name: str
    type: str
    description: str


@dataclass(frozen=True)
class RelationshipInstance(Record):
    chunk_id: str
    source_name: str
    target_name: str
    description: str


@dataclass(frozen=True)
class ClaimInstance(Record):
    chunk_id: str
    subject: str
    object: str
    type: str
    description: str
    source_span: str
    start_date: str | None = None
    end_date: str | None = None

    def __post_init__(self) -> None:
        if not self.subject.strip():
            raise ValueError("claim subject is empty")
        if self.start_date and self.end_date:
            if date.fromisoformat(self.start_date) > date.fromisoformat(self.end_date):
                raise ValueError("claim start_date is after end_date")


def normalize_text(s: str) -> str:
    return " ".join(s.split()).casefold()


@dataclass(frozen=True, order=True)
class EntityKey:
    normalized_name: str
    type: str

    @property
    def label(self) -> str:
        """Node label used in graph exports and hierarchy files."""
        return f"{self.normalized_name}::{self.type}" if self.type else self.normalized_name

    def to_record(self) -> list[str]:
        return [self.normalized_name, self.type]

    @classmethod
    def from_record(cls, data: list[str]) -> "EntityKey":
        return cls(data[0], data[1])


def normalize_entity_key(name: str, type: str) -> EntityKey:
    """Canonical identity of an entity: case-folded, whitespace-collapsed
    name plus type. Idempotent."""
    normalized = normalize_text(name)
    if not normalized:
        raise EmptyName("entity name is empty")
    return EntityKey(normalized, normalize_text(type))
