"""On-disk store for pipeline artifacts.

Layout::

    manifest.json          config snapshot, completed stages and their hashes
    prompts/               optional prompt overrides (<name>.txt)
    stages/<stage>.jsonl   one JSON record per line, keys sorted
    reports/               human and machine readable outputs

A stage counts as done only once the manifest lists it, and the manifest is
only rewritten after the stage file is fully in place, so a crash mid-stage
leaves the stage absent and it is simply redone.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

from filelock import FileLock, Timeout

from .errors import CorruptStage, StageIncomplete, WorkspaceLocked

STAGE_DEPS: dict[str, tuple[str, ...]] = {
    "chunks": (),
    "extraction": ("chunks",),
    "element_summaries": ("extraction",),
    "graph": ("element_summaries",),
    "hierarchy": ("graph",),
    "community_summaries": ("hierarchy",),
    "embeddings": ("chunks",),
}
STAGES = tuple(STAGE_DEPS)
MANIFEST_VERSION = 1


def canonical_line(record: Any) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def encode_records(records: Iterable[Any]) -> bytes:
    return "".join(canonical_line(r) + "\n" for r in records).encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def downstream(stage: str) -> list[str]:
    """Stages that (transitively) depend on ``stage``."""
    out: list[str] = []
    frontier = [stage]
    while frontier:
        s = frontier.pop()
        for name, deps in STAGE_DEPS.items():
            if s in deps and name not in out:
                out.append(name)
                frontier.append(name)
    return [s for s in STAGES if s in out]


class Workspace:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.manifest_path = self.root / "manifest.json"
        self.stage_dir = self.root / "stages"
        self.prompt_dir = self.root / "prompts"
        self.report_dir = self.root / "reports"
        self._lock = FileLock(str(self.root / ".lock"), timeout=0)

    @classmethod
    def create(cls, root: Path | str) -> "Workspace":
        ws = cls(root)
        for d in (ws.root, ws.stage_dir, ws.prompt_dir, ws.report_dir):
            d.mkdir(parents=True, exist_ok=True)
        if not ws.manifest_path.exists():
            ws._write_manifest({"version": MANIFEST_VERSION, "config": {}, "stages": {}})
        return ws

    @property
    def exists(self) -> bool:
        return self.manifest_path.exists()

    # -- manifest -----------------------------------------------------------

    def manifest(self) -> dict:
        if not self.manifest_path.exists():
            return {"version": MANIFEST_VERSION, "config": {}, "stages": {}}
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def _write_manifest(self, manifest: dict) -> None:
        data = json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
        _atomic_write(self.manifest_path, data.encode("utf-8"))

    def config_snapshot(self) -> dict:
        return self.manifest().get("config", {})

    def set_config(self, config: dict) -> None:
        manifest = self.manifest()
        manifest["config"] = config
        self._write_manifest(manifest)

    def is_complete(self, stage: str) -> bool:
        return stage in self.manifest().get("stages", {})

    def fingerprint(self, stage: str) -> str | None:
        entry = self.manifest().get("stages", {}).get(stage)
        return entry.get("fingerprint") if entry else None

    def completed(self) -> list[str]:
        done = self.manifest().get("stages", {})
        return [s for s in STAGES if s in done]

    def invalidate(self, stage: str) -> None:
        """Forget ``stage`` and everything built from it."""
        manifest = self.manifest()
        for s in [stage, *downstream(stage)]:
            manifest["stages"].pop(s, None)
        self._write_manifest(manifest)

    # -- locking ------------------------------------------------------------

    @contextlib.contextmanager
    def writer(self) -> Iterator["Workspace"]:
        """Hold the single-writer lock for the duration of the block."""
        self.root.mkdir(parents=True, exist_ok=True)
        try:
            self._lock.acquire()
        except Timeout:
            raise WorkspaceLocked(f"{self.root} is being written by another process") from None
        try:
            yield self
        finally:
            self._lock.release()

    # -- stages -------------------------------------------------------------

    def stage_path(self, stage: str) -> Path:
        if stage not in STAGE_DEPS:
            raise KeyError(f"unknown stage {stage!r}")
        return self.stage_dir / f"{stage}.jsonl"

    def save_stage(self, stage: str, records: Iterable[Any], fingerprint: str | None = None) -> str:
        path = self.stage_path(stage)
        missing = [d for d in STAGE_DEPS[stage] if not self.is_complete(d)]
        if missing:
            raise StageIncomplete(f"cannot write {stage}: {', '.join(missing)} not complete")
        records = list(records)
        data = encode_records(records)
        digest = hashlib.sha256(data).hexdigest()
        manifest = self.manifest()
        # anything built from an older version of this stage is stale now
        for s in [stage, *downstream(stage)]:
            manifest["stages"].pop(s, None)
        self._write_manifest(manifest)
        _atomic_write(path, data)
        manifest["stages"][stage] = {"sha256": digest, "records": len(records), "fingerprint": fingerprint}
        self._write_manifest(manifest)
        return digest

    def load_stage(self, stage: str) -> list[Any]:
        path = self.stage_path(stage)
        entry = self.manifest().get("stages", {}).get(stage)
        if entry is None:
            raise StageIncomplete(f"stage {stage} has not been completed")
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise CorruptStage(f"stage file for {stage} is missing") from None
        if hashlib.sha256(data).hexdigest() != entry["sha256"]:
            raise CorruptStage(f"stage file for {stage} does not match its recorded hash")
        # split on \n only: str.splitlines also breaks on \x85 and \u2028, which json writes raw
        return [json.loads(line) for line in data.decode("utf-8").split("\n") if line]

    # -- reports ------------------------------------------------------------

    def write_report(self, name: str, content: str | dict | list) -> Path:
        path = self.report_dir / name
        if isinstance(content, str):
            data = content if content.endswith("\n") else content + "\n"
        else:
            data = json.dumps(content, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
        _atomic_write(path, data.encode("utf-8"))
        return path
