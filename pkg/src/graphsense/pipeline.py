"""End-to-end indexing, querying and evaluation over a workspace."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from . import config as cfgmod
from .baselines import ChunkEmbeddingStore, build_embedding_store, ss_answer, ts_answer
from .chunker import ChunkingConfig, chunk_corpus
from .communities import CommunitySummarizer, CommunitySummary, PackingBudget
from .elements import CLAIM, ElementSummarizer, ElementSummary, group_instances
from .errors import GraphSenseError, InvalidConfig, NoIndex, StageFailed, StageIncomplete
from .evaluation import Question, QuestionSet, WinRateMatrix, generate_questions, resolve_metrics, run_tournament
from .extractor import ExtractionPromptConfig, ExtractionResult, run_extraction
from .graph import EntityGraph, build_graph
from .leiden import CommunityHierarchy, LeidenConfig, detect_communities, project_level
from .llm import LLMGateway, MockProvider, OpenAICompatibleProvider, get_codec
from .llm.base import Provider
from .model import Document, TextChunk
from .prompts import PromptSet
from .query import GlobalAnswer, QueryConfig, Source, map_reduce
from .workspace import STAGES, Workspace

log = logging.getLogger(__name__)

CONDITIONS = ("c0", "c1", "c2", "c3", "ts", "ss")
REPORT_LEVELS = 4

# config keys each stage depends on (besides its upstream stages)
STAGE_KEYS: dict[str, tuple[str, ...]] = {
    "chunks": ("chunking", "tokenizer"),
    "extraction": ("extraction", "llm.provider", "llm.model", "seed"),
    "element_summaries": ("summaries", "llm.provider", "llm.model", "seed"),
    "graph": (),
    "hierarchy": ("leiden", "seed"),
    "community_summaries": ("communities", "llm.provider", "llm.model", "seed"),
    "embeddings": ("embedding", "llm.provider", "llm.model", "llm.mock_dimension"),
}


def build_gateway(config: Mapping[str, Any], provider: Provider | None = None) -> LLMGateway:
    if provider is None:
        if config["llm.provider"] == "mock":
            provider = MockProvider(mode="hash", seed=config["seed"], dimension=config["llm.mock_dimension"])
        else:
            provider = OpenAICompatibleProvider(
                config["llm.endpoint"],
                config["llm.model"],
                api_key_env=config["llm.api_key_env"],
                embedding_endpoint=config["embedding.endpoint"] or None,
                embedding_model=config["embedding.model"] or None,
                timeout=config["llm.timeout"],
            )
    return LLMGateway(
        provider,
        get_codec(config["tokenizer.codec"]),
        context_limit=config["llm.context_limit"],
        max_retries=config["llm.max_retries"],
        concurrency=config["llm.concurrency"],
    )


def read_corpus(corpus_dir: Path | str) -> list[Document]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise StageFailed("chunks", f"corpus directory {root} does not exist")
    docs = []
    for path in sorted(root.glob("*.txt")):
        text = path.read_text(encoding="utf-8")
        if text.strip():
            docs.append(Document.create(path.stem, text))
    if not docs:
        raise StageFailed("chunks", f"no non-empty .txt files in {root}")
    return docs


def _digest(obj: Any) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()


# -- loading ----------------------------------------------------------------


@dataclass
class Index:
    chunks: list[TextChunk]
    graph: EntityGraph
    hierarchy: CommunityHierarchy
    summaries: dict[tuple[int, int], CommunitySummary]

    def level_summaries(self, level: int) -> list[CommunitySummary]:
        """Summaries of the communities at ``level``, projected down when the
        hierarchy is shallower than that."""
        partition = project_level(self.hierarchy, level)
        return [self.summaries[ref] for ref in partition.refs]


def load_chunks(ws: Workspace) -> list[TextChunk]:
    return [TextChunk.from_record(r) for r in ws.load_stage("chunks")]


def load_graph(ws: Workspace) -> EntityGraph:
    return EntityGraph.from_records(ws.load_stage("graph"))


def load_hierarchy(ws: Workspace) -> CommunityHierarchy:
    return CommunityHierarchy.from_records(ws.load_stage("hierarchy"))


def load_summaries(ws: Workspace) -> dict[tuple[int, int], CommunitySummary]:
    out = {}
    for r in ws.load_stage("community_summaries"):
        s = CommunitySummary.from_record(r)
        out[(s.level, s.community_id)] = s
    return out


def load_index(ws: Workspace) -> Index:
    if not ws.exists:
        raise NoIndex(f"{ws.root} is not a workspace; run index first")
    try:
        return Index(load_chunks(ws), load_graph(ws), load_hierarchy(ws), load_summaries(ws))
    except StageIncomplete as exc:
        raise NoIndex(f"index is incomplete: {exc}") from None


# -- indexing ---------------------------------------------------------------


@dataclass
class StageReport:
    name: str
    status: str  # ran | cached
    seconds: float
    records: int


@dataclass
class LevelRow:
    condition: str
    units: int
    tokens: int
    percent_of_max: float


@dataclass
class IndexReport:
    stages: list[StageReport] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    levels: list[LevelRow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        lines = ["stage                 status    seconds   records"]
        for s in self.stages:
            lines.append(f"{s.name:<21} {s.status:<8} {s.seconds:>8.2f} {s.records:>9}")
        lines.append("")
        lines.append("  ".join(f"{k}={v}" for k, v in self.counts.items()))
        lines.append("")
        lines.append(render_level_table(self.levels))
        return "\n".join(lines)


def render_level_table(rows: Sequence[LevelRow]) -> str:
    out = [f"{'':<8}" + "".join(f"{r.condition.upper():>10}" for r in rows)]
    out.append(f"{'Units':<8}" + "".join(f"{r.units:>10}" for r in rows))
    out.append(f"{'Tokens':<8}" + "".join(f"{r.tokens:>10}" for r in rows))
    out.append(f"{'% Max':<8}" + "".join(f"{r.percent_of_max:>10.1f}" for r in rows))
    return "\n".join(out)


def level_table(index: Index) -> list[LevelRow]:
    """Summary count and token total per condition, TS being the corpus."""
    ts_tokens = sum(c.token_count for c in index.chunks)
    rows = []
    for level in range(REPORT_LEVELS):
        summaries = index.level_summaries(level)
        rows.append(LevelRow(f"c{level}", len(summaries), sum(s.token_count for s in summaries), 0.0))
    rows.append(LevelRow("ts", len(index.chunks), ts_tokens, 0.0))
    top = max(r.tokens for r in rows) or 1
    for r in rows:
        r.percent_of_max = round(100.0 * r.tokens / top, 1)
    return rows


class Indexer:
    def __init__(
        self,
        ws: Workspace,
        config: Mapping[str, Any],
        gw: LLMGateway,
        progress: Callable[[str], None] | None = None,
    ):
        self.ws = ws
        self.config = dict(config)
        self.gw = gw
        self.codec = gw.codec
        self.prompts = PromptSet.from_dir(ws.prompt_dir)
        self.progress = progress or (lambda msg: None)
        self.report = IndexReport()

    def seed(self, stage: str) -> int:
        return cfgmod.stage_seed(self.config["seed"], stage)

    def _fingerprint(self, stage: str, extra: Any = None) -> str:
        return _digest({"config": cfgmod.subset(self.config, STAGE_KEYS[stage]), "extra": extra})

    def _stage(self, name: str, build: Callable[[], list], extra: Any = None) -> list:
        fp = self._fingerprint(name, extra)
        if self.ws.is_complete(name) and self.ws.fingerprint(name) == fp:
            records = self.ws.load_stage(name)
            self.report.stages.append(StageReport(name, "cached", 0.0, len(records)))
            return records
        self.progress(f"running {name}")
        start = time.perf_counter()
        try:
            records = build()
        except StageFailed:
            raise
        except GraphSenseError as exc:
            raise StageFailed(name, str(exc)) from exc
        self.ws.save_stage(name, records, fingerprint=fp)
        self.report.stages.append(StageReport(name, "ran", time.perf_counter() - start, len(records)))
        return records

    def run(self, corpus_dir: Path | str) -> IndexReport:
        c = self.config
        docs = read_corpus(corpus_dir)
        corpus_hash = _digest([(d.title, d.text) for d in docs])

        chunk_cfg = ChunkingConfig(c["chunking.size"], c["chunking.overlap"])
        chunk_records = self._stage(
            "chunks", lambda: [ch.to_record() for ch in chunk_corpus(docs, chunk_cfg, self.codec)], corpus_hash
        )
        chunks = [TextChunk.from_record(r) for r in chunk_records]

        extraction_cfg = ExtractionPromptConfig(
            entity_types=tuple(t.strip() for t in c["extraction.entity_types"].split(",") if t.strip()),
            claims_enabled=c["extraction.claims"],
            max_gleanings=c["extraction.max_gleanings"],
            max_output_tokens=c["extraction.max_output_tokens"],
        )
        extraction_records = self._stage(
            "extraction",
            lambda: [
                r.to_record()
                for r in run_extraction(chunks, extraction_cfg, self.gw, self.prompts, self.seed("extraction"))
            ],
        )
        results = [ExtractionResult.from_record(r) for r in extraction_records]

        def summarize_elements() -> list[dict]:
            grouped = group_instances(results)
            summarizer = ElementSummarizer(
                self.gw, c["summaries.max_tokens"], self.prompts, self.seed("element_summaries")
            )
            groups = grouped.entities + grouped.relationships + grouped.claims
            return [s.to_record() for s in summarizer.summarize_all(groups)]

        element_records = self._stage("element_summaries", summarize_elements)
        elements = [ElementSummary.from_record(r) for r in element_records]

        def make_graph() -> list[dict]:
            by_kind: dict[str, list[ElementSummary]] = {"entity": [], "relationship": [], CLAIM: []}
            for e in elements:
                by_kind[e.kind].append(e)
            return build_graph(by_kind["entity"], by_kind["relationship"], by_kind[CLAIM]).to_records()

        graph = EntityGraph.from_records(self._stage("graph", make_graph))

        leiden_cfg = LeidenConfig(
            resolution=c["leiden.resolution"],
            randomness=c["leiden.randomness"],
            seed=self.seed("hierarchy"),
            max_levels=c["leiden.max_levels"],
            n_starts=c["leiden.n_starts"],
        )

        def make_hierarchy() -> list[dict]:
            if not graph.nodes:
                raise StageFailed("hierarchy", "the entity graph is empty; nothing was extracted")
            return detect_communities(graph, leiden_cfg).to_records()

        hierarchy = CommunityHierarchy.from_records(self._stage("hierarchy", make_hierarchy))

        budget = PackingBudget(c["communities.context_tokens"], c["communities.summary_tokens"])

        def summarize_communities() -> list[dict]:
            summarizer = CommunitySummarizer(self.gw, budget, self.prompts, self.seed("community_summaries"))
            return [s.to_record() for s in summarizer.summarize_all(hierarchy, graph).values()]

        summary_records = self._stage("community_summaries", summarize_communities)
        summaries = {(r["level"], r["community_id"]): CommunitySummary.from_record(r) for r in summary_records}

        self._stage("embeddings", lambda: build_embedding_store(chunks, self.gw).to_records())

        index = Index(chunks, graph, hierarchy, summaries)
        self.report.counts = {
            "documents": len(docs),
            "chunks": len(chunks),
            "nodes": len(graph.nodes),
            "edges": len(graph.edges),
            "claims": sum(len(v) for v in graph.covariates.values()),
            "levels": hierarchy.depth,
        }
        self.report.levels = level_table(index)
        self.ws.write_report("index.json", self.report.to_dict())
        self.ws.write_report("index.txt", self.report.render())
        return self.report


def index_corpus(
    corpus_dir: Path | str,
    workspace: Path | str,
    config: Mapping[str, Any] | None = None,
    gw: LLMGateway | None = None,
    progress: Callable[[str], None] | None = None,
) -> IndexReport:
    config = dict(config or cfgmod.resolve(workspace))
    ws = Workspace.create(workspace)
    with ws.writer():
        ws.set_config(config)
        return Indexer(ws, config, gw or build_gateway(config), progress).run(corpus_dir)


# -- querying ---------------------------------------------------------------


def query_config(config: Mapping[str, Any], level: int = 0, seed: int | None = None) -> QueryConfig:
    return QueryConfig(
        level=level,
        batch_token_size=config["query.batch_tokens"],
        final_context_tokens=config["query.final_context_tokens"],
        map_max_answer_tokens=config["query.map_max_answer_tokens"],
        answer_max_tokens=config["query.answer_max_tokens"],
        seed=cfgmod.stage_seed(config["seed"] if seed is None else seed, "query"),
    )


def answer(
    ws: Workspace,
    question: str,
    condition: str,
    config: Mapping[str, Any],
    gw: LLMGateway,
    *,
    seed: int | None = None,
    index: Index | None = None,
) -> GlobalAnswer:
    condition = condition.lower()
    if condition not in CONDITIONS:
        raise InvalidConfig(f"unknown condition {condition!r}; expected one of {', '.join(CONDITIONS)}")
    prompts = PromptSet.from_dir(ws.prompt_dir)
    index = index or load_index(ws)
    if condition == "ts":
        return ts_answer(question, index.chunks, gw, query_config(config, seed=seed), prompts)
    if condition == "ss":
        try:
            store = ChunkEmbeddingStore.from_records(ws.load_stage("embeddings"))
        except StageIncomplete as exc:
            raise NoIndex(f"embeddings are missing: {exc}") from None
        return ss_answer(
            question, store, index.chunks, gw, config["query.ss_context_tokens"], query_config(config, seed=seed), prompts
        )
    level = int(condition[1:])
    qcfg = query_config(config, level, seed)
    sources = [Source(s.ref, s.text) for s in index.level_summaries(level)]
    return map_reduce(question, sources, gw, qcfg, prompts, condition=condition)


# -- evaluation -------------------------------------------------------------


def load_questions(path: Path | str) -> list[Question]:
    out = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n")):
        if not line.strip():
            continue
        data = json.loads(line)
        if isinstance(data, str):
            out.append(Question(f"q{i:04d}", "", "", data))
        else:
            out.append(
                Question(data.get("id") or f"q{i:04d}", data.get("persona", ""), data.get("task", ""), data["text"])
            )
    if not out:
        raise InvalidConfig(f"no questions in {path}")
    return out


def write_questions(qs: QuestionSet, path: Path | str) -> None:
    lines = [json.dumps(r, sort_keys=True, ensure_ascii=False) for r in qs.to_records()]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def make_questions(description: str, n: int, config: Mapping[str, Any], gw: LLMGateway) -> QuestionSet:
    return generate_questions(description, n, gw, seed=cfgmod.stage_seed(config["seed"], "questions"))


def evaluate(
    ws: Workspace,
    questions: Sequence[Question],
    conditions: Sequence[str],
    metrics: str | Sequence[str],
    config: Mapping[str, Any],
    gw: LLMGateway,
    trials: int | None = None,
) -> dict[str, WinRateMatrix]:
    index = load_index(ws)
    answers: dict[str, dict[str, str]] = {}
    for cond in conditions:
        answers[cond] = {}
        rows = []
        for q in questions:
            result = answer(ws, q.text, cond, config, gw, index=index)
            answers[cond][q.id] = result.text
            rows.append({"question_id": q.id, "condition": cond, **result.to_dict()})
        ws.write_report(f"answers_{cond}.json", rows)
    matrices = run_tournament(
        questions,
        answers,
        conditions,
        resolve_metrics(metrics),
        gw,
        trials=trials or config["eval.trials"],
        seed=cfgmod.stage_seed(config["seed"], "eval"),
        alternate=config["eval.alternate"],
        prompts=PromptSet.from_dir(ws.prompt_dir),
    )
    ws.write_report("winrates.json", {m: w.to_dict() for m, w in matrices.items()})
    ws.write_report("winrates.txt", "\n\n".join(w.render() for w in matrices.values()))
    return matrices


def status(ws: Workspace) -> dict[str, bool]:
    done = set(ws.completed())
    return {s: s in done for s in STAGES}
