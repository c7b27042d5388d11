from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..errors import ProviderRejection

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]
    max_output_tokens: int = 1024
    temperature: float = 0.0
    logit_bias: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ProviderRejection("chat request has no messages")
        for m in self.messages:
            if m.role not in ROLES:
                raise ProviderRejection(f"unknown message role {m.role!r}")
        if self.max_output_tokens < 1:
            raise ProviderRejection("max_output_tokens must be >= 1")
        if self.temperature < 0:
            raise ProviderRejection("temperature must be >= 0")

    @classmethod
    def of(cls, prompt: str, *, system: str | None = None, **kwargs) -> "ChatRequest":
        msgs = [Message("user", prompt)]
        if system:
            msgs.insert(0, Message("system", system))
        return cls(tuple(msgs), **kwargs)

    @property
    def last_content(self) -> str:
        return self.messages[-1].content

    def prompt_text(self) -> str:
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


class Provider(ABC):
    """A chat-completion + embedding backend.

    Implementations must be safe to call from several threads at once.
    Raise ``TransportError`` for retryable failures and ``ProviderRejection``
    for anything the gateway should not retry.
    """

    name = "provider"

    @abstractmethod
    def complete(self, request: ChatRequest) -> ChatResponse:
        ...

    @abstractmethod
    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        ...
