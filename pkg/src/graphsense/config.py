"""Configuration schema, loading and per-stage seed derivation.

Values are merged in this order, later wins: schema defaults, the
``graphsense.toml`` file (or ``--config``), ``GRAPHSENSE_*`` environment
variables, command-line flags. Keys are dotted (``chunking.size``); in the
TOML file they are written as tables (``[chunking] size = 600``).
"""

from __future__ import annotations

import hashlib
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import InvalidConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

CONFIG_FILE = "graphsense.toml"
ENV_PREFIX = "GRAPHSENSE_"


@dataclass(frozen=True)
class Setting:
    key: str
    type: type
    default: Any
    help: str
    choices: tuple[str, ...] | None = None

    @property
    def flag(self) -> str:
        return "--" + self.key.replace(".", "-").replace("_", "-")

    @property
    def dest(self) -> str:
        return self.key.replace(".", "__")

    @property
    def env(self) -> str:
        return ENV_PREFIX + self.key.replace(".", "_").upper()


SCHEMA: tuple[Setting, ...] = (
    Setting("seed", int, 0, "base seed; each stage derives its own from it"),
    Setting("llm.provider", str, "http", "chat/embedding backend", ("http", "mock")),
    Setting("llm.endpoint", str, "", "base URL of an OpenAI-compatible API"),
    Setting("llm.model", str, "", "chat model name"),
    Setting("llm.api_key_env", str, "GRAPHSENSE_API_KEY", "environment variable holding the API key"),
    Setting("llm.concurrency", int, 8, "maximum simultaneous provider calls"),
    Setting("llm.max_retries", int, 3, "retries after a transport failure"),
    Setting("llm.context_limit", int, 128000, "provider context window in tokens"),
    Setting("llm.timeout", float, 120.0, "HTTP timeout in seconds"),
    Setting("llm.mock_dimension", int, 256, "embedding dimension of the mock provider"),
    Setting("embedding.endpoint", str, "", "embeddings base URL (defaults to llm.endpoint)"),
    Setting("embedding.model", str, "", "embedding model name (defaults to llm.model)"),
    Setting("tokenizer.codec", str, "approx", "token codec used for all budgets", ("approx", "whitespace")),
    Setting("chunking.size", int, 600, "chunk size in tokens"),
    Setting("chunking.overlap", int, 100, "overlap between consecutive chunks in tokens"),
    Setting("extraction.max_gleanings", int, 1, "extra extraction rounds after a NO self-check"),
    Setting("extraction.claims", bool, False, "also extract claims (covariates)"),
    Setting("extraction.entity_types", str, "organization,person,geo,event", "comma separated entity types"),
    Setting("extraction.max_output_tokens", int, 2000, "output cap per extraction call"),
    Setting("summaries.max_tokens", int, 500, "token cap for each element summary"),
    Setting("leiden.resolution", float, 1.0, "modularity resolution"),
    Setting("leiden.randomness", float, 0.01, "refinement randomness"),
    Setting("leiden.max_levels", int, 4, "maximum hierarchy depth"),
    Setting("leiden.n_starts", int, 64, "independent Leiden restarts; the best is kept"),
    Setting("communities.context_tokens", int, 8000, "packed context budget per community report"),
    Setting("communities.summary_tokens", int, 2000, "token cap per community report"),
    Setting("query.batch_tokens", int, 8000, "tokens per map batch"),
    Setting("query.final_context_tokens", int, 8000, "tokens of ranked answers given to the reduce call"),
    Setting("query.map_max_answer_tokens", int, 500, "output cap per map answer"),
    Setting("query.answer_max_tokens", int, 1000, "output cap of the final answer"),
    Setting("query.ss_context_tokens", int, 8000, "retrieved-chunk budget for the ss condition"),
    Setting("eval.trials", int, 5, "judge trials per question, metric and pair"),
    Setting("eval.alternate", bool, True, "alternate answer order across judge trials"),
)
SETTINGS: dict[str, Setting] = {s.key: s for s in SCHEMA}


def defaults() -> dict[str, Any]:
    return {s.key: s.default for s in SCHEMA}


def coerce(setting: Setting, value: Any) -> Any:
    t = setting.type
    try:
        if t is bool:
            if isinstance(value, bool):
                out = value
            elif isinstance(value, str) and value.lower() in ("1", "true", "yes", "on"):
                out = True
            elif isinstance(value, str) and value.lower() in ("0", "false", "no", "off"):
                out = False
            else:
                raise ValueError(value)
        elif t is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            out = int(value)
        elif t is float:
            if isinstance(value, bool):
                raise ValueError(value)
            out = float(value)
        else:
            if not isinstance(value, str):
                raise ValueError(value)
            out = value
    except (TypeError, ValueError):
        raise InvalidConfig(f"{setting.key}: expected {t.__name__}, got {value!r}") from None
    if setting.choices and out not in setting.choices:
        raise InvalidConfig(f"{setting.key}: must be one of {', '.join(setting.choices)}, got {out!r}")
    return out


def flatten(doc: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def validate(values: Mapping[str, Any], source: str) -> dict[str, Any]:
    unknown = sorted(set(values) - set(SETTINGS))
    if unknown:
        raise InvalidConfig(f"unknown config keys in {source}: {', '.join(unknown)}")
    return {k: coerce(SETTINGS[k], v) for k, v in values.items()}


def load_file(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
    return validate(flatten(doc), str(path))


def from_env(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    return {s.key: coerce(s, environ[s.env]) for s in SCHEMA if s.env in environ}


def resolve(
    workspace: Path | str | None = None,
    config_file: Path | str | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    values = defaults()
    path = Path(config_file) if config_file else (Path(workspace) / CONFIG_FILE if workspace else None)
    if config_file and not path.exists():
        raise InvalidConfig(f"config file {path} does not exist")
    if path is not None and path.exists():
        values.update(load_file(path))
    values.update(from_env(environ))
    values.update(validate(overrides or {}, "overrides"))
    return values


def stage_seed(seed: int, stage: str) -> int:
    """``seed`` plus the first 4 bytes of sha256(stage name), mod 2**32."""
    offset = int.from_bytes(hashlib.sha256(stage.encode("utf-8")).digest()[:4], "big")
    return (seed + offset) % 2**32


def subset(config: Mapping[str, Any], prefixes: tuple[str, ...]) -> dict[str, Any]:
    return {k: v for k, v in sorted(config.items()) if any(k == p or k.startswith(p + ".") for p in prefixes)}
