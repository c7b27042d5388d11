"""Per-chunk entity / relationship / claim extraction.

The LLM answers with a flat list of delimited tuples::

    ("entity"<|>NAME<|>TYPE<|>DESCRIPTION)
    ##
    ("relationship"<|>SOURCE<|>TARGET<|>DESCRIPTION)
    <|COMPLETE|>

Records are separated by the record delimiter or by newlines. Anything that
does not fit the grammar is counted and skipped.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

from .errors import BatchAborted, GatewayError, GraphSenseError
from .llm.base import ChatRequest, Message
from .llm.gateway import LLMGateway
from .model import ClaimInstance, EntityInstance, RelationshipInstance, TextChunk, normalize_text
from .prompts import DEFAULT_PROMPTS, PromptSet

log = logging.getLogger(__name__)

DEFAULT_ENTITY_TYPES = ("organization", "person", "geo", "event")

DEFAULT_EXAMPLES = (
    (
        "Marisol Ortega founded Tidewater Labs in Lisbon in 2019. Tidewater Labs now "
        "partners with the Atlantic Marine Institute on coastal sensor research.",
        '("entity"<|>MARISOL ORTEGA<|>PERSON<|>Marisol Ortega is the founder of Tidewater Labs)\n##\n'
        '("entity"<|>TIDEWATER LABS<|>ORGANIZATION<|>Tidewater Labs is a research lab founded in Lisbon in 2019)\n##\n'
        '("entity"<|>LISBON<|>GEO<|>Lisbon is the city where Tidewater Labs was founded)\n##\n'
        '("entity"<|>ATLANTIC MARINE INSTITUTE<|>ORGANIZATION<|>The Atlantic Marine Institute runs coastal sensor research)\n##\n'
        '("relationship"<|>MARISOL ORTEGA<|>TIDEWATER LABS<|>Marisol Ortega founded Tidewater Labs)\n##\n'
        '("relationship"<|>TIDEWATER LABS<|>LISBON<|>Tidewater Labs was founded in Lisbon)\n##\n'
        '("relationship"<|>TIDEWATER LABS<|>ATLANTIC MARINE INSTITUTE<|>The two organizations partner on coastal sensor research)\n'
        "<|COMPLETE|>",
    ),
)


@dataclass(frozen=True)
class ExtractionPromptConfig:
    entity_types: tuple[str, ...] = DEFAULT_ENTITY_TYPES
    few_shot_examples: tuple[tuple[str, str], ...] = DEFAULT_EXAMPLES
    claims_enabled: bool = False
    max_gleanings: int = 1
    tuple_delimiter: str = "<|>"
    record_delimiter: str = "##"
    completion_delimiter: str = "<|COMPLETE|>"
    yes_token: str = "YES"
    no_token: str = "NO"
    max_output_tokens: int = 2000

    def __post_init__(self) -> None:
        if not self.entity_types:
            raise ValueError("entity_types must not be empty")
        if self.max_gleanings < 0:
            raise ValueError("max_gleanings must be >= 0")


@dataclass
class ParsedTuples:
    entities: list[EntityInstance] = field(default_factory=list)
    relationships: list[RelationshipInstance] = field(default_factory=list)
    claims: list[ClaimInstance] = field(default_factory=list)
    malformed: int = 0


@dataclass
class ExtractionResult:
    chunk_id: str
    entities: list[EntityInstance] = field(default_factory=list)
    relationships: list[RelationshipInstance] = field(default_factory=list)
    claims: list[ClaimInstance] = field(default_factory=list)
    gleaning_rounds_used: int = 0
    malformed_records_skipped: int = 0
    chat_calls: int = 0
    error: str | None = None
    failed: bool = False

    def absorb(self, parsed: ParsedTuples) -> None:
        self.entities.extend(parsed.entities)
        self.relationships.extend(parsed.relationships)
        self.claims.extend(parsed.claims)
        self.malformed_records_skipped += parsed.malformed

    def to_record(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "entities": [e.to_record() for e in self.entities],
            "relationships": [r.to_record() for r in self.relationships],
            "claims": [c.to_record() for c in self.claims],
            "gleaning_rounds_used": self.gleaning_rounds_used,
            "malformed_records_skipped": self.malformed_records_skipped,
            "chat_calls": self.chat_calls,
            "error": self.error,
            "failed": self.failed,
        }

    @classmethod
    def from_record(cls, data: dict) -> "ExtractionResult":
        return cls(
            chunk_id=data["chunk_id"],
            entities=[EntityInstance.from_record(e) for e in data["entities"]],
            relationships=[RelationshipInstance.from_record(r) for r in data["relationships"]],
            claims=[ClaimInstance.from_record(c) for c in data["claims"]],
            gleaning_rounds_used=data["gleaning_rounds_used"],
            malformed_records_skipped=data["malformed_records_skipped"],
            chat_calls=data.get("chat_calls", 0),
            error=data.get("error"),
            failed=data.get("failed", False),
        )


def _unquote(field_: str) -> str:
    f = field_.strip()
    if len(f) >= 2 and f[0] == f[-1] == '"':
        f = f[1:-1].strip()
    return f


def _optional_date(value: str) -> str | None:
    if not value or value.upper() in ("NONE", "NULL", "N/A"):
        return None
    return date.fromisoformat(value).isoformat()


def parse_tuples(
    raw: str | bytes,
    *,
    tuple_delimiter: str = "<|>",
    record_delimiter: str = "##",
    completion_delimiter: str = "<|COMPLETE|>",
    chunk_id: str = "",
) -> ParsedTuples:
    """Parse delimited-tuple output. Never raises."""
    if isinstance(raw, (bytes, bytearray)):
        raw = bytes(raw).decode("utf-8", errors="replace")
    out = ParsedTuples()
    if completion_delimiter:
        raw = raw.replace(completion_delimiter, "\n")
    splitter = "\n" if not record_delimiter else f"{re.escape(record_delimiter)}|\n"
    for segment in re.split(splitter, raw):
        s = segment.strip()
        if not s:
            continue
        if len(s) < 2 or s[0] != "(" or s[-1] != ")" or not tuple_delimiter:
            out.malformed += 1
            continue
        parts = [_unquote(p) for p in s[1:-1].split(tuple_delimiter)]
        tag = parts[0].lower()
        if tag == "entity" and len(parts) == 4 and parts[1]:
            out.entities.append(EntityInstance(chunk_id, parts[1], parts[2], parts[3]))
        elif (
            tag == "relationship"
            and len(parts) == 4
            and normalize_text(parts[1])
            and normalize_text(parts[2])
            and normalize_text(parts[1]) != normalize_text(parts[2])
        ):
            out.relationships.append(RelationshipInstance(chunk_id, parts[1], parts[2], parts[3]))
        elif tag == "claim" and len(parts) == 8 and parts[1]:
            try:
                start, end = _optional_date(parts[5]), _optional_date(parts[6])
                obj = "" if parts[2].upper() == "NONE" else parts[2]
                out.claims.append(
                    ClaimInstance(chunk_id, parts[1], obj, parts[3], parts[4], parts[7], start, end)
                )
            except ValueError:
                out.malformed += 1
        else:
            out.malformed += 1
    return out


def _format_examples(cfg: ExtractionPromptConfig) -> str:
    blocks = []
    for i, (excerpt, expected) in enumerate(cfg.few_shot_examples, start=1):
        blocks.append(f"Example {i}:\nEntity types: {','.join(cfg.entity_types)}\nText:\n{excerpt}\nOutput:\n{expected}")
    return "\n\n".join(blocks)


class Extractor:
    def __init__(self, cfg: ExtractionPromptConfig, gateway: LLMGateway, prompts: PromptSet = DEFAULT_PROMPTS, seed: int = 0):
        self.cfg = cfg
        self.gw = gateway
        self.prompts = prompts
        self.seed = seed

    def _render(self, name: str, chunk: TextChunk) -> str:
        cfg = self.cfg
        return self.prompts.render(
            name,
            input_text=chunk.text,
            entity_types=",".join(cfg.entity_types),
            examples=_format_examples(cfg),
            tuple_delimiter=cfg.tuple_delimiter,
            record_delimiter=cfg.record_delimiter,
            completion_delimiter=cfg.completion_delimiter,
        )

    def _parse(self, text: str, chunk: TextChunk) -> ParsedTuples:
        return parse_tuples(
            text,
            tuple_delimiter=self.cfg.tuple_delimiter,
            record_delimiter=self.cfg.record_delimiter,
            completion_delimiter=self.cfg.completion_delimiter,
            chunk_id=chunk.id,
        )

    def _chat(self, messages: Sequence[Message], result: ExtractionResult, **kwargs) -> str:
        kwargs.setdefault("max_output_tokens", self.cfg.max_output_tokens)
        result.chat_calls += 1
        return self.gw.chat(ChatRequest(tuple(messages), seed=self.seed, **kwargs)).text

    def _says_no(self, answer: str) -> bool:
        return answer.strip().strip(".!\"'").upper().startswith(self.cfg.no_token.upper())

    def extract(self, chunk: TextChunk) -> ExtractionResult:
        if not chunk.text.strip():
            raise ValueError(f"chunk {chunk.id} is empty")
        cfg = self.cfg
        result = ExtractionResult(chunk_id=chunk.id)
        history = [Message("user", self._render("extract_graph", chunk))]
        reply = self._chat(history, result)
        result.absorb(self._parse(reply, chunk))
        history.append(Message("assistant", reply))

        try:
            for _ in range(cfg.max_gleanings):
                check = history + [Message("user", self.prompts["gleaning_check"])]
                verdict = self._chat(
                    check,
                    result,
                    max_output_tokens=1,
                    logit_bias={cfg.yes_token: 100, cfg.no_token: 100},
                )
                if not self._says_no(verdict):
                    break
                history = history + [Message("user", self.prompts["gleaning_continue"])]
                reply = self._chat(history, result)
                result.absorb(self._parse(reply, chunk))
                history.append(Message("assistant", reply))
                result.gleaning_rounds_used += 1
        except GatewayError as exc:
            result.error = f"gleaning round {result.gleaning_rounds_used + 1} failed: {exc}"
            log.warning("chunk %s: %s", chunk.id, result.error)

        if cfg.claims_enabled:
            try:
                reply = self._chat([Message("user", self._render("extract_claims", chunk))], result)
                result.absorb(self._parse(reply, chunk))
            except GatewayError as exc:
                result.error = (result.error + "; " if result.error else "") + f"claim extraction failed: {exc}"
        return result


def extract_from_chunk(
    chunk: TextChunk,
    cfg: ExtractionPromptConfig,
    gw: LLMGateway,
    prompts: PromptSet = DEFAULT_PROMPTS,
    seed: int = 0,
) -> ExtractionResult:
    return Extractor(cfg, gw, prompts, seed).extract(chunk)


def run_extraction(
    chunks: Sequence[TextChunk],
    cfg: ExtractionPromptConfig,
    gw: LLMGateway,
    prompts: PromptSet = DEFAULT_PROMPTS,
    seed: int = 0,
) -> list[ExtractionResult]:
    """Extract every chunk concurrently. Output order follows ``chunks``.

    A chunk whose base extraction fails yields a result with ``failed`` set;
    only a batch where every chunk fails raises :class:`BatchAborted`.
    """
    extractor = Extractor(cfg, gw, prompts, seed)

    def one(chunk: TextChunk) -> ExtractionResult:
        try:
            return extractor.extract(chunk)
        except GraphSenseError as exc:
            log.warning("extraction failed for chunk %s: %s", chunk.id, exc)
            return ExtractionResult(chunk_id=chunk.id, error=str(exc), failed=True)

    results = gw.map(one, chunks)
    if results and all(r.failed for r in results):
        raise BatchAborted(f"all {len(results)} chunks failed extraction; first error: {results[0].error}")
    return results
