"""Group element instances by identity and summarize each group once."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import GatewayError
from .extractor import ExtractionResult
from .llm.base import ChatRequest
from .llm.gateway import LLMGateway
from .model import normalize_entity_key, normalize_text
from .prompts import DEFAULT_PROMPTS, PromptSet

log = logging.getLogger(__name__)

ENTITY, RELATIONSHIP, CLAIM = "entity", "relationship", "claim"


@dataclass
class ElementGroup:
    kind: str
    key: tuple[str, ...]
    name: str
    type: str = ""
    # (description, chunk_id) in extraction order
    instances: list[tuple[str, str]] = field(default_factory=list)
    placeholder: bool = False
    first_seen: int = 0


@dataclass(frozen=True)
class ElementSummary:
    kind: str
    key: tuple[str, ...]
    name: str
    type: str
    description: str
    token_count: int
    instance_count: int
    source_chunk_ids: tuple[str, ...] = ()
    degraded: bool = False
    placeholder: bool = False
    first_seen: int = 0

    @property
    def id(self) -> str:
        return f"{self.kind}:" + "|".join(self.key)

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "key": list(self.key),
            "name": self.name,
            "type": self.type,
            "description": self.description,
            "token_count": self.token_count,
            "instance_count": self.instance_count,
            "source_chunk_ids": list(self.source_chunk_ids),
            "degraded": self.degraded,
            "placeholder": self.placeholder,
            "first_seen": self.first_seen,
        }

    @classmethod
    def from_record(cls, d: dict) -> "ElementSummary":
        return cls(
            kind=d["kind"],
            key=tuple(d["key"]),
            name=d["name"],
            type=d["type"],
            description=d["description"],
            token_count=d["token_count"],
            instance_count=d["instance_count"],
            source_chunk_ids=tuple(d["source_chunk_ids"]),
            degraded=d.get("degraded", False),
            placeholder=d.get("placeholder", False),
            first_seen=d.get("first_seen", 0),
        )


@dataclass
class GroupedInstances:
    entities: list[ElementGroup]
    relationships: list[ElementGroup]
    claims: list[ElementGroup]


def relationship_key(source: str, target: str) -> tuple[str, str]:
    a, b = normalize_text(source), normalize_text(target)
    return (a, b) if a <= b else (b, a)


def group_instances(results: Iterable[ExtractionResult]) -> GroupedInstances:
    """Bucket instances by element identity.

    Entities group on ``EntityKey``; relationships on the unordered pair of
    normalized endpoint names; claims on (subject, object, type). Endpoint
    names that match no extracted entity get a placeholder entity group.
    """
    entities: dict[tuple[str, ...], ElementGroup] = {}
    relationships: dict[tuple[str, ...], ElementGroup] = {}
    claims: dict[tuple[str, ...], ElementGroup] = {}
    ordinal = 0
    for result in results:
        for e in result.entities:
            key = normalize_entity_key(e.name, e.type)
            k = (key.normalized_name, key.type)
            group = entities.setdefault(k, ElementGroup(ENTITY, k, e.name.strip(), key.type, first_seen=ordinal))
            group.instances.append((e.description, e.chunk_id))
            ordinal += 1
        for r in result.relationships:
            k = relationship_key(r.source_name, r.target_name)
            group = relationships.setdefault(k, ElementGroup(RELATIONSHIP, k, f"{k[0]} -- {k[1]}", first_seen=ordinal))
            group.instances.append((r.description, r.chunk_id))
            ordinal += 1
        for c in result.claims:
            k = (normalize_text(c.subject), normalize_text(c.object), normalize_text(c.type))
            group = claims.setdefault(k, ElementGroup(CLAIM, k, c.subject.strip(), k[2], first_seen=ordinal))
            span = f" (source: {c.source_span})" if c.source_span else ""
            dates = ""
            if c.start_date or c.end_date:
                dates = f" [{c.start_date or '?'} .. {c.end_date or '?'}]"
            group.instances.append((f"{c.description}{dates}{span}", c.chunk_id))
            ordinal += 1

    known_names = {k[0] for k in entities}
    for k in relationships:
        for name in k:
            if name not in known_names:
                entities[(name, "")] = ElementGroup(ENTITY, (name, ""), name, "", placeholder=True, first_seen=ordinal)
                known_names.add(name)

    return GroupedInstances(
        entities=[entities[k] for k in sorted(entities)],
        relationships=[relationships[k] for k in sorted(relationships)],
        claims=[claims[k] for k in sorted(claims)],
    )


def _unique_in_order(items: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for x in items:
        seen.setdefault(x, None)
    return tuple(seen)


class ElementSummarizer:
    def __init__(
        self,
        gateway: LLMGateway,
        max_summary_tokens: int = 500,
        prompts: PromptSet = DEFAULT_PROMPTS,
        seed: int = 0,
    ):
        self.gw = gateway
        self.codec = gateway.codec
        self.max_tokens = max_summary_tokens
        self.prompts = prompts
        self.seed = seed

    def _summary(self, group: ElementGroup, description: str, degraded: bool = False) -> ElementSummary:
        return ElementSummary(
            kind=group.kind,
            key=group.key,
            name=group.name,
            type=group.type,
            description=description,
            token_count=self.codec.count(description),
            instance_count=len(group.instances),
            source_chunk_ids=_unique_in_order(c for _, c in group.instances),
            degraded=degraded,
            placeholder=group.placeholder,
            first_seen=group.first_seen,
        )

    def summarize(self, group: ElementGroup) -> ElementSummary:
        if group.placeholder:
            return self._summary(group, "")
        descriptions = [d.strip() for d, _ in group.instances]
        if len(descriptions) == 1:
            text = descriptions[0] or group.name
            return self._summary(group, self.codec.take_prefix(text, self.max_tokens))
        prompt = self.prompts.render(
            "summarize_descriptions",
            element_kind=group.kind,
            element_name=group.name,
            descriptions="\n".join(f"- {d}" for d in descriptions if d),
            max_tokens=self.max_tokens,
        )
        try:
            reply = self.gw.chat(
                ChatRequest.of(prompt, max_output_tokens=self.max_tokens, seed=self.seed)
            ).text.strip()
        except GatewayError as exc:
            log.warning("summary of %s %s degraded: %s", group.kind, group.key, exc)
            reply = ""
        if not reply:
            fallback = " ".join(d for d in descriptions if d) or group.name
            return self._summary(group, self.codec.take_prefix(fallback, self.max_tokens), degraded=True)
        return self._summary(group, self.codec.take_prefix(reply, self.max_tokens))

    def summarize_all(self, groups: Sequence[ElementGroup]) -> list[ElementSummary]:
        return self.gw.map(self.summarize, groups)


def summarize_element(group: ElementGroup, gw: LLMGateway, max_summary_tokens: int = 500, **kwargs) -> ElementSummary:
    return ElementSummarizer(gw, max_summary_tokens, **kwargs).summarize(group)
