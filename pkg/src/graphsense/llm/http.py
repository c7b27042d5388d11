"""OpenAI-compatible chat-completions / embeddings client."""

from __future__ import annotations

import logging
import os
from typing import Callable, Sequence

import httpx

from ..errors import ProviderRejection, TransportError
from .base import ChatRequest, ChatResponse, Provider

log = logging.getLogger(__name__)

DEFAULT_KEY_ENV = "GRAPHSENSE_API_KEY"


class OpenAICompatibleProvider(Provider):
    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key: str | None = None,
        api_key_env: str = DEFAULT_KEY_ENV,
        embedding_endpoint: str | None = None,
        embedding_model: str | None = None,
        timeout: float = 120.0,
        token_ids: Callable[[str], list[int]] | None = None,
        client: httpx.Client | None = None,
    ):
        if not endpoint:
            raise ValueError("llm.endpoint is not configured")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.embedding_endpoint = (embedding_endpoint or endpoint).rstrip("/")
        self.embedding_model = embedding_model or model
        # the environment variable wins over a key written in a config file
        self.api_key = os.environ.get(api_key_env) or api_key
        self.token_ids = token_ids
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, url: str, payload: dict) -> dict:
        try:
            resp = self._client.post(url, json=payload, headers=self._headers())
        except httpx.HTTPError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 400:
            raise ProviderRejection(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise TransportError(f"invalid JSON body: {resp.text[:200]}") from exc

    def _logit_bias(self, bias: dict[str, float]) -> dict[str, float] | None:
        if not bias:
            return None
        if self.token_ids is None:
            log.debug("logit bias requested but no token-id lookup configured; dropping it")
            return None
        out: dict[str, float] = {}
        for token, value in bias.items():
            for tid in self.token_ids(token):
                out[str(tid)] = value
        return out or None

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload: dict = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
            "seed": request.seed,
        }
        bias = self._logit_bias(dict(request.logit_bias))
        if bias:
            payload["logit_bias"] = bias
        body = self._post(f"{self.endpoint}/chat/completions", payload)
        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected completion payload: {str(body)[:200]}") from exc
        usage = body.get("usage") or {}
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        body = self._post(
            f"{self.embedding_endpoint}/embeddings",
            {"model": self.embedding_model, "input": list(texts)},
        )
        try:
            data = sorted(body["data"], key=lambda d: d.get("index", 0))
            return [[float(x) for x in d["embedding"]] for d in data]
        except (KeyError, TypeError) as exc:
            raise TransportError(f"unexpected embedding payload: {str(body)[:200]}") from exc
