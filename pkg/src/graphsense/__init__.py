"""Graph-based retrieval-augmented generation over private text corpora.

The index is built in stages (chunks, LLM extraction, element summaries,
entity graph, hierarchical communities, community reports) and queried by
map-reduce over the community reports of one hierarchy level.
"""

from .baselines import ChunkEmbeddingStore, build_embedding_store, ss_answer, ts_answer
from .chunker import ChunkingConfig, chunk_corpus, chunk_document, expected_chunk_count
from .communities import (
    CommunitySummarizer,
    CommunitySummary,
    PackingBudget,
    pack_hierarchical_context,
    pack_leaf_context,
    summarize_all_communities,
)
from .elements import ElementSummarizer, ElementSummary, group_instances
from .evaluation import BUILTIN_METRICS, Metric, generate_questions, judge_pair, run_tournament
from .extractor import ExtractionPromptConfig, Extractor, extract_from_chunk, parse_tuples, run_extraction
from .graph import EntityGraph, build_graph
from .leiden import CommunityHierarchy, LeidenConfig, detect_communities, modularity, project_level
from .llm import LLMGateway, MockProvider, OpenAICompatibleProvider
from .model import Document, TextChunk
from .query import GlobalAnswer, QueryConfig, map_answer, map_reduce, prepare_batches, reduce_answers
from .workspace import Workspace

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_METRICS",
    "ChunkEmbeddingStore",
    "ChunkingConfig",
    "CommunityHierarchy",
    "CommunitySummarizer",
    "CommunitySummary",
    "Document",
    "ElementSummarizer",
    "ElementSummary",
    "EntityGraph",
    "ExtractionPromptConfig",
    "Extractor",
    "GlobalAnswer",
    "LLMGateway",
    "LeidenConfig",
    "Metric",
    "MockProvider",
    "OpenAICompatibleProvider",
    "PackingBudget",
    "QueryConfig",
    "TextChunk",
    "Workspace",
    "build_embedding_store",
    "build_graph",
    "chunk_corpus",
    "chunk_document",
    "detect_communities",
    "expected_chunk_count",
    "extract_from_chunk",
    "generate_questions",
    "group_instances",
    "judge_pair",
    "map_answer",
    "map_reduce",
    "modularity",
    "pack_hierarchical_context",
    "pack_leaf_context",
    "parse_tuples",
    "prepare_batches",
    "project_level",
    "reduce_answers",
    "run_extraction",
    "run_tournament",
    "ss_answer",
    "summarize_all_communities",
    "ts_answer",
]
