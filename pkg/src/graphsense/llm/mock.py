"""Deterministic offline provider.

Two modes:

``scripted``
    An ordered list of :class:`ScriptRule`. The first rule whose matcher
    accepts the request supplies the reply. Used for protocol tests where
    the exact call sequence matters.

``hash``
    Replies are a pure function of a stable hash of (seed, full prompt).
    The responder recognises the package's default prompt templates and
    answers in the shape each one asks for, so a whole index/query run
    produces a non-trivial graph without any network access.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

from ..errors import GatewayError, ProviderRejection
from .base import ChatRequest, ChatResponse, Provider

Matcher = Union[str, "re.Pattern[str]", Callable[[ChatRequest], bool], None]
Reply = Union[str, Sequence[str], Callable[[ChatRequest], str], BaseException, type]


def stable_hash(*parts: object) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("utf-8", "surrogatepass"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


@dataclass
class ScriptRule:
    """``matcher`` None matches everything; a string matches as a substring
    of the last message; a compiled pattern is searched in the last message.
    A list reply is consumed one item per match, repeating the final item."""

    matcher: Matcher
    reply: Reply
    scope: str = "last"
    hits: int = field(default=0, init=False)

    def matches(self, request: ChatRequest) -> bool:
        text = request.last_content if self.scope == "last" else request.prompt_text()
        m = self.matcher
        if m is None:
            return True
        if isinstance(m, str):
            return m in text
        if isinstance(m, re.Pattern):
            return m.search(text) is not None
        return bool(m(request))

    def produce(self, request: ChatRequest) -> str:
        reply = self.reply
        self.hits += 1
        if isinstance(reply, BaseException):
            raise reply
        if isinstance(reply, type) and issubclass(reply, BaseException):
            raise reply(f"scripted failure #{self.hits}")
        if isinstance(reply, str):
            return reply
        if callable(reply):
            return reply(request)
        items = list(reply)
        return items[min(self.hits, len(items)) - 1]


class MockProvider(Provider):
    name = "mock"

    def __init__(
        self,
        script: Sequence[ScriptRule | tuple] | None = None,
        *,
        mode: str | None = None,
        seed: int = 0,
        dimension: int = 256,
        fallback: str | None = None,
    ):
        self.rules = [r if isinstance(r, ScriptRule) else ScriptRule(*r) for r in (script or [])]
        self.mode = mode or ("scripted" if script else "hash")
        if self.mode not in ("scripted", "hash"):
            raise ValueError(f"unknown mock mode {self.mode!r}")
        self.seed = seed
        self.dimension = dimension
        self.fallback = fallback
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()
        self._hash = HashResponder()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls.append(request)
            rule = None
            if self.mode == "scripted":
                rule = next((r for r in self.rules if r.matches(request)), None)
            if rule is not None:
                text = rule.produce(request)
            elif self.mode == "hash" or self.fallback == "hash":
                text = self._hash.respond(request, self.seed)
            else:
                raise ProviderRejection("no scripted reply matches the request")
        return ChatResponse(
            text=text,
            prompt_tokens=sum(len(m.content.split()) for m in request.messages),
            completion_tokens=len(text.split()),
        )

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise ProviderRejection("embed() needs at least one text")
        return [hashed_bow_vector(t, self.dimension, self.seed) for t in texts]

    def calls_matching(self, needle: str) -> list[ChatRequest]:
        return [c for c in self.calls if needle in c.last_content]


class FailingProvider(Provider):
    """Raises the given gateway error on every call."""

    name = "failing"

    def __init__(self, error: type[GatewayError] | GatewayError):
        self.error = error
        self.attempts = 0

    def _raise(self):
        self.attempts += 1
        err = self.error
        raise err if isinstance(err, BaseException) else err("provider down")

    def complete(self, request: ChatRequest) -> ChatResponse:
        self._raise()

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        self._raise()


_WORD = re.compile(r"\w+")


def hashed_bow_vector(text: str, dimension: int = 256, seed: int = 0) -> list[float]:
    """Signed feature-hashing bag of words, L2-normalised."""
    vec = [0.0] * dimension
    words = [w.lower() for w in _WORD.findall(text)] or ["\x00empty"]
    for w in words:
        h = stable_hash(seed, w)
        vec[h % dimension] += 1.0 if (h >> 32) & 1 else -1.0
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0.0:
        # every token cancelled out; fall back to a single hashed coordinate
        vec[stable_hash(seed, text) % dimension] = 1.0
        return vec
    return [v / norm for v in vec]


# -- hash-mode responder -------------------------------------------------------

_STOP = {
    "A", "An", "And", "As", "At", "But", "By", "During", "For", "From", "He", "Her",
    "His", "In", "It", "Its", "Of", "On", "Our", "She", "That", "The", "Their",
    "These", "They", "This", "Those", "To", "We", "When", "While", "With", "After",
    "Before", "Later", "Meanwhile", "Then", "There", "Both", "Each", "Many", "Some",
}
_NAME = re.compile(r"\b[A-Z][a-zA-Z]+(?:\s+[A-Z][a-zA-Z]+)*\b")
_SENTENCE = re.compile(r"[^.!?]+[.!?]?")


def _first_words(text: str, n: int) -> str:
    return " ".join(text.split()[:n])


def _budget(prompt: str, default: int) -> int:
    m = re.search(r"under (\d+) tokens", prompt)
    return int(m.group(1)) if m else default


def _section(prompt: str, header: str, stop: str | None = None) -> str:
    start = prompt.rfind(header)
    if start < 0:
        return ""
    body = prompt[start + len(header):]
    if stop is not None:
        end = body.find(stop)
        if end >= 0:
            body = body[:end]
    return body.strip()


class HashResponder:
    """Answers the default templates with hash-derived, well-formed output."""

    def respond(self, request: ChatRequest, seed: int) -> str:
        prompt = request.last_content
        full = request.prompt_text()
        h = stable_hash(seed, full)
        if "were all entities extracted" in prompt:
            return "YES" if h % 4 else "NO"
        if "MANY entities were missed" in prompt:
            return self._completion_marker(full)
        if "-Real Data-" in prompt and '("claim"' in prompt:
            return self._claims(prompt, seed)
        if "-Real Data-" in prompt:
            return self._extract(prompt, seed)
        if "Descriptions to merge:" in prompt:
            return self._merge(prompt)
        if "community report" in prompt:
            return self._report(prompt)
        if "helpfulness score" in prompt:
            return self._map(prompt, h)
        if "Write a thorough answer" in prompt:
            return "Answer: " + _first_words(_section(prompt, "---\n", "\n\nAnswer:"), min(_budget(prompt, 200), 80))
        if "You are judging two answers" in prompt:
            winner = ("A", "B", "tie")[h % 3]
            return json.dumps({"winner": winner, "reasoning": f"mock verdict {h % 1000}"})
        m = re.search(r"(?:List|Write) (\d+) (users|tasks|questions|potential users)", prompt)
        if m:
            n = int(m.group(1))
            kind = m.group(2).split()[-1].rstrip("s")
            return json.dumps([f"{kind} {i + 1} [{(h >> (i % 48)) & 0xFFFF:04x}]" for i in range(n)])
        return f"mock-{h:016x}"

    @staticmethod
    def _delims(prompt: str) -> tuple[str, str, str]:
        tup = re.search(r'\("entity"(.+?)<entity_name>', prompt) or re.search(r'\("claim"(.+?)<subject>', prompt)
        rec = re.search(r"using (\S+) between records", prompt)
        done = re.search(r"When finished, output (\S+)|output (\S+) when finished", prompt)
        return (
            tup.group(1) if tup else "<|>",
            rec.group(1) if rec else "##",
            (done.group(1) or done.group(2)) if done else "<|COMPLETE|>",
        )

    def _completion_marker(self, full: str) -> str:
        return self._delims(full)[2]

    @staticmethod
    def _names(sentence: str) -> list[str]:
        out: list[str] = []
        for match in _NAME.finditer(sentence):
            words = match.group(0).split()
            while words and words[0] in _STOP:
                words = words[1:]
            if words:
                name = " ".join(words)
                if name not in out:
                    out.append(name)
        return out

    def _extract(self, prompt: str, seed: int) -> str:
        tup, rec, done = self._delims(prompt)
        text = _section(prompt, "\nText: ", "\nOutput:")
        types_line = _section(prompt, "\nEntity types: ", "\n")
        types = [t.strip() for t in types_line.split(",") if t.strip()] or ["entity"]
        records: list[str] = []
        seen: set[str] = set()
        for sentence in _SENTENCE.findall(text):
            sentence = sentence.strip()
            names = self._names(sentence)
            desc = _first_words(sentence, 30)
            for name in names:
                if name.upper() in seen:
                    continue
                seen.add(name.upper())
                etype = types[stable_hash(seed, name.upper()) % len(types)].upper()
                records.append(f'("entity"{tup}{name.upper()}{tup}{etype}{tup}{desc})')
            for a, b in zip(names, names[1:]):
                records.append(f'("relationship"{tup}{a.upper()}{tup}{b.upper()}{tup}{desc})')
        return f"\n{rec}\n".join(records) + f"\n{done}"

    def _claims(self, prompt: str, seed: int) -> str:
        tup, rec, done = self._delims(prompt)
        text = _section(prompt, "\nText: ", "\nOutput:")
        records = []
        for sentence in _SENTENCE.findall(text):
            names = self._names(sentence)
            if len(names) >= 2 and stable_hash(seed, sentence) % 3 == 0:
                s = sentence.strip()
                records.append(
                    f'("claim"{tup}{names[0].upper()}{tup}{names[1].upper()}{tup}ASSOCIATION{tup}'
                    f"{_first_words(s, 20)}{tup}NONE{tup}NONE{tup}{_first_words(s, 12)})"
                )
        return f"\n{rec}\n".join(records) + f"\n{done}"

    def _merge(self, prompt: str) -> str:
        block = _section(prompt, "Descriptions to merge:\n", "\n\nMerged description:")
        parts: list[str] = []
        for line in block.splitlines():
            line = line.strip().lstrip("- ").strip()
            if line and line not in parts:
                parts.append(line)
        return _first_words(" ".join(parts), min(_budget(prompt, 500), 60))

    def _report(self, prompt: str) -> str:
        context = _section(prompt, "Community context:\n", "\n\nJSON:")
        first = context.splitlines()[0] if context else "Empty community"
        title = first.split(":")[0].strip()[:80] or "Community"
        body = _first_words(context, min(_budget(prompt, 2000), 120))
        return json.dumps({"title": title, "summary": body})

    def _map(self, prompt: str, h: int) -> str:
        question = _section(prompt, "---Question---\n", "\n\n---Data---")
        context = _section(prompt, "---Data---\n", "\n\nJSON:")
        qwords = {w.lower() for w in _WORD.findall(question) if len(w) > 3}
        cwords = {w.lower() for w in _WORD.findall(context)}
        overlap = len(qwords & cwords)
        if overlap == 0:
            score = 0 if h % 3 == 0 else h % 40
        else:
            score = min(100, 40 + 10 * overlap + h % 20)
        answer = _first_words(context, min(_budget(prompt, 500), 40))
        return json.dumps({"answer": answer, "score": score})
