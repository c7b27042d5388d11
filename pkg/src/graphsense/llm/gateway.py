from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

from ..errors import BudgetExceeded, ProviderRejection, TransportError
from .base import ChatRequest, ChatResponse, Provider
from .codec import TokenCodec, WhitespaceCodec

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class GatewayStats:
    chat_calls: int = 0
    chat_attempts: int = 0
    embed_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0


class LLMGateway:
    """Uniform entry point for chat and embedding calls.

    Adds what every caller needs on top of a raw provider: a local context
    budget check, bounded retries with exponential backoff on transport
    failures, and a cap on simultaneous outbound calls.
    """

    def __init__(
        self,
        provider: Provider,
        codec: TokenCodec | None = None,
        *,
        context_limit: int = 128_000,
        max_retries: int = 3,
        backoff: float = 0.5,
        concurrency: int = 8,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        self.provider = provider
        self.codec = codec or WhitespaceCodec()
        self.context_limit = context_limit
        self.max_retries = max_retries
        self.backoff = backoff
        self.concurrency = concurrency
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(concurrency)
        self._lock = threading.Lock()
        self.stats = GatewayStats()

    def count_tokens(self, text: str) -> int:
        return self.codec.count(text)

    def chat(self, request: ChatRequest) -> ChatResponse:
        prompt_tokens = sum(self.codec.count(m.content) for m in request.messages)
        if prompt_tokens > self.context_limit:
            raise BudgetExceeded(
                f"prompt has {prompt_tokens} tokens, provider limit is {self.context_limit}"
            )
        with self._lock:
            self.stats.chat_calls += 1
        response = self._with_retries(lambda: self.provider.complete(request), count_attempts=True)
        with self._lock:
            self.stats.prompt_tokens += response.prompt_tokens or prompt_tokens
            self.stats.completion_tokens += response.completion_tokens
        return response

    def complete(self, prompt: str, **kwargs) -> str:
        """Single-turn convenience wrapper around :meth:`chat`."""
        return self.chat(ChatRequest.of(prompt, **kwargs)).text

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise ProviderRejection("embed() needs at least one text")
        with self._lock:
            self.stats.embed_calls += 1
        vectors = self._with_retries(lambda: self.provider.embed(list(texts)))
        if len(vectors) != len(texts):
            raise ProviderRejection(
                f"provider returned {len(vectors)} vectors for {len(texts)} texts"
            )
        if len({len(v) for v in vectors}) > 1:
            raise ProviderRejection("provider returned vectors of mixed dimension")
        return vectors

    def _with_retries(self, call: Callable[[], R], count_attempts: bool = False) -> R:
        attempt = 0
        while True:
            attempt += 1
            if count_attempts:
                with self._lock:
                    self.stats.chat_attempts += 1
            try:
                with self._slots:
                    return call()
            except TransportError as exc:
                if attempt > self.max_retries:
                    raise
                delay = self.backoff * (2 ** (attempt - 1))
                log.warning("transport failure (attempt %d), retrying in %.2fs: %s", attempt, delay, exc)
                self._sleep(delay)

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        """Apply ``fn`` concurrently (bounded by the cap), keeping input order."""
        items = list(items)
        if len(items) <= 1 or self.concurrency == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=min(self.concurrency, len(items))) as pool:
            return list(pool.map(fn, items))
