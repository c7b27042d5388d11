"""Global question answering by map-reduce over a list of source texts.

The sources are community summaries for the graph conditions and raw chunks
for the text-summarization baseline; both go through the same functions.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .errors import GatewayError, InvalidConfig, NoSummaries, ProviderRejection, QueryFailed
from .llm.base import ChatRequest
from .llm.codec import TokenCodec
from .llm.gateway import LLMGateway
from .prompts import DEFAULT_PROMPTS, PromptSet

log = logging.getLogger(__name__)

NO_ANSWER = "No relevant information was found in the indexed dataset."
BATCH_SEPARATOR = "\n\n"
REPORTS_STYLE = "Analyst Reports"
SOURCES_STYLE = "Source Texts"


@dataclass(frozen=True)
class QueryConfig:
    level: int = 0
    batch_token_size: int = 8000
    final_context_tokens: int = 8000
    map_max_answer_tokens: int = 500
    answer_max_tokens: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.level < 0:
            raise InvalidConfig("level must be >= 0")
        for name in ("batch_token_size", "final_context_tokens", "map_max_answer_tokens", "answer_max_tokens"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be > 0")


@dataclass(frozen=True)
class Source:
    ref: str
    text: str


@dataclass
class Batch:
    index: int
    sources: list[Source]
    text: str
    token_count: int
    truncated: bool = False

    @property
    def refs(self) -> list[str]:
        return [s.ref for s in self.sources]


@dataclass
class RatedAnswer:
    batch_index: int
    text: str
    score: int
    parse_failed: bool = False
    clamped: bool = False
    failed: bool = False


@dataclass
class LedgerEntry:
    ref: str
    score: int | None
    tokens: int
    truncated: bool = False


@dataclass
class GlobalAnswer:
    question: str
    text: str
    condition: str = ""
    used: list[LedgerEntry] = field(default_factory=list)
    filtered_zero_count: int = 0
    total_map_calls: int = 0
    reduce_calls: int = 0
    batch_tokens: list[int] = field(default_factory=list)
    final_context_tokens: int = 0
    map_answers: list[RatedAnswer] = field(default_factory=list)

    @property
    def context_tokens_consumed(self) -> int:
        return sum(self.batch_tokens) + self.final_context_tokens

    @property
    def used_scores(self) -> list[int | None]:
        return [e.score for e in self.used]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["context_tokens_consumed"] = self.context_tokens_consumed
        return data


def _validate_question(question: str) -> str:
    if not question or not question.strip():
        raise ProviderRejection("question must be a non-empty string")
    return question.strip()


def _join_cost(codec: TokenCodec, text: str, first: bool) -> int:
    return codec.count(text if first else BATCH_SEPARATOR + text)


def prepare_batches(
    sources: Sequence[Source], batch_token_size: int, seed: int, codec: TokenCodec
) -> list[Batch]:
    """Shuffle with a seeded generator, then fill batches greedily in that
    order. A source too large for any batch gets a batch of its own,
    truncated to fit."""
    if not sources:
        raise NoSummaries("nothing to answer from: no summaries or chunks")
    order = list(sources)
    random.Random(seed).shuffle(order)

    batches: list[Batch] = []
    current: list[Source] = []
    used = 0

    def close() -> None:
        nonlocal current, used
        if current:
            text = BATCH_SEPARATOR.join(s.text for s in current)
            batches.append(Batch(len(batches), current, text, codec.count(text)))
        current, used = [], 0

    for src in order:
        cost = codec.count(src.text)
        if cost > batch_token_size:
            close()
            text = codec.take_prefix(src.text, batch_token_size)
            batches.append(Batch(len(batches), [src], text, codec.count(text), truncated=True))
            continue
        step = _join_cost(codec, src.text, not current)
        if used + step > batch_token_size:
            close()
            step = cost
        current.append(src)
        used += step
    close()
    return batches


_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


def parse_rated(text: str) -> tuple[str, int, bool] | None:
    """Return ``(answer, score, clamped)`` from a JSON reply, or None."""
    match = _JSON_OBJECT.search(text or "")
    if not match:
        return None
    try:
        data = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict) or not isinstance(data.get("answer"), str):
        return None
    raw = data.get("score")
    if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
        return None
    try:
        score = round(float(raw))
    except (ValueError, OverflowError):
        return None
    clamped = min(100, max(0, score))
    return data["answer"].strip(), clamped, clamped != score


def map_answer(
    question: str,
    batch: Batch,
    gw: LLMGateway,
    cfg: QueryConfig = QueryConfig(),
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> RatedAnswer:
    prompt = prompts.render(
        "map_answer", max_tokens=cfg.map_max_answer_tokens, question=question, context=batch.text
    )
    try:
        reply = gw.chat(ChatRequest.of(prompt, max_output_tokens=cfg.map_max_answer_tokens, seed=cfg.seed)).text
    except GatewayError as exc:
        log.warning("map call for batch %d failed: %s", batch.index, exc)
        return RatedAnswer(batch.index, "", 0, failed=True)
    parsed = parse_rated(reply)
    if parsed is None:
        return RatedAnswer(batch.index, reply, 0, parse_failed=True)
    text, score, clamped = parsed
    return RatedAnswer(batch.index, text, score, clamped=clamped)


def rank_answers(rated: Sequence[RatedAnswer]) -> tuple[list[RatedAnswer], int]:
    """Drop zero scores, then sort by score (high first) and batch index."""
    survivors = [r for r in rated if r.score > 0]
    return sorted(survivors, key=lambda r: (-r.score, r.batch_index)), len(rated) - len(survivors)


def pack_answers(
    ranked: Sequence[RatedAnswer], limit: int, codec: TokenCodec
) -> tuple[str, list[LedgerEntry]]:
    """Greedy prefix over ranked answers. If the best answer alone is too
    long it is truncated so the final call always has something to read."""
    parts: list[str] = []
    ledger: list[LedgerEntry] = []
    used = 0
    for r in ranked:
        block = f"Analyst {r.batch_index + 1} (helpfulness {r.score}):\n{r.text}"
        cost = _join_cost(codec, block, not parts)
        if used + cost > limit:
            if not parts:
                block = codec.take_prefix(block, limit)
                parts.append(block)
                ledger.append(LedgerEntry(f"batch:{r.batch_index}", r.score, codec.count(block), truncated=True))
            break
        parts.append(block)
        used += cost
        ledger.append(LedgerEntry(f"batch:{r.batch_index}", r.score, codec.count(block)))
    text = BATCH_SEPARATOR.join(parts)
    while codec.count(text) > limit and parts:
        parts.pop()
        ledger.pop()
        text = BATCH_SEPARATOR.join(parts)
    return text, ledger


def final_answer(
    question: str,
    context: str,
    reference_style: str,
    gw: LLMGateway,
    cfg: QueryConfig,
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> str:
    prompt = prompts.render(
        "answer",
        reference_style=reference_style,
        max_tokens=cfg.answer_max_tokens,
        question=question,
        context=context,
    )
    try:
        return gw.chat(ChatRequest.of(prompt, max_output_tokens=cfg.answer_max_tokens, seed=cfg.seed)).text.strip()
    except GatewayError as exc:
        raise QueryFailed(f"final answer call failed: {exc}") from exc


def reduce_answers(
    question: str,
    rated: Sequence[RatedAnswer],
    gw: LLMGateway,
    cfg: QueryConfig = QueryConfig(),
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> GlobalAnswer:
    ranked, filtered = rank_answers(rated)
    result = GlobalAnswer(question, NO_ANSWER, filtered_zero_count=filtered, map_answers=list(rated))
    if not ranked:
        return result
    context, ledger = pack_answers(ranked, cfg.final_context_tokens, gw.codec)
    result.used = ledger
    result.final_context_tokens = gw.codec.count(context)
    result.text = final_answer(question, context, REPORTS_STYLE, gw, cfg, prompts)
    result.reduce_calls = 1
    return result


def map_reduce(
    question: str,
    sources: Sequence[Source],
    gw: LLMGateway,
    cfg: QueryConfig = QueryConfig(),
    prompts: PromptSet = DEFAULT_PROMPTS,
    condition: str = "",
) -> GlobalAnswer:
    question = _validate_question(question)
    batches = prepare_batches(sources, cfg.batch_token_size, cfg.seed, gw.codec)
    rated = gw.map(lambda b: map_answer(question, b, gw, cfg, prompts), batches)
    rated.sort(key=lambda r: r.batch_index)
    result = reduce_answers(question, rated, gw, cfg, prompts)
    result.condition = condition
    result.total_map_calls = len(batches)
    result.batch_tokens = [b.token_count for b in batches]
    return result
