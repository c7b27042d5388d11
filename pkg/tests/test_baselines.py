import math
import random

import pytest

from graphsense.baselines import ChunkEmbeddingStore, StoreEntry, build_embedding_store, dot, normalize, ss_answer, ts_answer
from graphsense.errors import NoIndex, ProviderRejection
from graphsense.llm import LLMGateway, MockProvider, WhitespaceCodec
from graphsense.llm.base import ChatRequest, ChatResponse, Provider
from graphsense.model import TextChunk
from graphsense.query import GlobalAnswer, QueryConfig

WS = WhitespaceCodec()
ANSWER = "Write a thorough answer"


def chunk(i: int, n: int = 10, w: str = "w") -> TextChunk:
    text = " ".join([f"{w}{i}"] * n)
    return TextChunk(f"c{i:03d}", "doc", i, text, n, 0)


class VectorProvider(Provider):
    """Fixed embeddings keyed by text; chat always answers FINAL."""

    def __init__(self, vectors: dict[str, list[float]]):
        self.vectors = vectors
        self.calls: list[ChatRequest] = []

    def complete(self, request):
        self.calls.append(request)
        return ChatResponse("FINAL", 0, 1)

    def embed(self, texts):
        return [self.vectors[t] for t in texts]


# -- TS ---------------------------------------------------------------------


def test_ts_uses_the_same_ledger_schema():
    chunks = [chunk(i, 100) for i in range(7)]
    gw = LLMGateway(MockProvider(seed=1), WS)
    out = ts_answer("What is going on?", chunks, gw, QueryConfig(batch_token_size=250))
    assert isinstance(out, GlobalAnswer) and out.condition == "ts"
    # two 100-token chunks per 250-token batch
    assert out.total_map_calls == math.ceil(7 / 2) == 4
    assert set(GlobalAnswer.__dataclass_fields__) <= set(out.to_dict())


# -- SS ---------------------------------------------------------------------


def _brute_force_rank(query, vectors):
    best = []
    for cid, v in vectors.items():
        s = sum(a * b for a, b in zip(query, v))
        best.append((round(-s, 12), cid))
    return [cid for _, cid in sorted(best)]


def test_rank_matches_brute_force():
    rng = random.Random(2)
    for _ in range(20):
        vecs = {f"c{i:03d}": normalize([rng.gauss(0, 1) for _ in range(6)]) for i in range(rng.randint(1, 30))}
        store = ChunkEmbeddingStore([StoreEntry(k, v, 1) for k, v in vecs.items()])
        q = normalize([rng.gauss(0, 1) for _ in range(6)])
        assert [cid for cid, _ in store.rank(q)] == _brute_force_rank(q, vecs)


def test_orthogonal_ties_break_on_chunk_id():
    store = ChunkEmbeddingStore([StoreEntry(c, (0.0, 1.0), 1) for c in ["c2", "c0", "c1"]])
    assert [c for c, _ in store.rank((1.0, 0.0))] == ["c0", "c1", "c2"]


def test_dimension_mismatch_rejected():
    store = ChunkEmbeddingStore([StoreEntry("c", (1.0, 0.0), 1)])
    with pytest.raises(ProviderRejection):
        store.rank((1.0, 0.0, 0.0))


def test_ss_fills_budget_in_rank_order():
    chunks = [chunk(i, 3000) for i in range(4)]
    vectors = {c.text: [float(i + 1), 1.0] for i, c in enumerate(chunks)}
    vectors["which?"] = [1.0, 0.0]
    prov = VectorProvider(vectors)
    gw = LLMGateway(prov, WS)
    store = build_embedding_store(chunks, gw)
    out = ss_answer("which?", store, chunks, gw, context_limit_tokens=8000)
    # the most x-aligned vectors win; two 3000-token chunks fit in 8000
    assert [e.ref for e in out.used] == ["c003", "c002"]
    assert out.final_context_tokens == 6000 <= 8000
    assert out.text == "FINAL" and len(prov.calls) == 1 and out.condition == "ss"


def test_ss_empty_store():
    gw = LLMGateway(MockProvider(), WS)
    with pytest.raises(NoIndex):
        ss_answer("q?", ChunkEmbeddingStore(), [], gw)
    with pytest.raises(NoIndex):
        build_embedding_store([], gw)


def test_store_round_trip_and_unit_norms():
    chunks = [chunk(i) for i in range(70)] + [chunk(0)]
    gw = LLMGateway(MockProvider(dimension=32), WS)
    store = build_embedding_store(chunks, gw, batch_size=16)
    assert len(store.entries) == 71 and store.dimension == 32
    assert all(abs(dot(e.vector, e.vector) - 1) < 1e-9 for e in store.entries)
    # identical texts embed identically
    assert store.entries[0].vector == store.entries[-1].vector
    assert ChunkEmbeddingStore.from_records(store.to_records()) == store


def test_zero_vector_rejected():
    with pytest.raises(ProviderRejection):
        normalize([0.0, 0.0])


def test_ss_deterministic():
    chunks = [chunk(i, 50, w) for i, w in enumerate("abcdefgh")]

    def run():
        gw = LLMGateway(MockProvider(seed=4), WS)
        return ss_answer("Which a0 b1 items?", build_embedding_store(chunks, gw), chunks, gw, 120).to_dict()
    assert run() == run()
