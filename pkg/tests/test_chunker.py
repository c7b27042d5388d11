import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphsense.chunker import ChunkingConfig, chunk_corpus, chunk_document, expected_chunk_count
from graphsense.errors import EmptyName, InvalidConfig
from graphsense.llm import RegexCodec, WhitespaceCodec
from graphsense.model import ClaimInstance, Document, EntityKey, content_id, normalize_entity_key

WS = WhitespaceCodec()


def doc_of(n_tokens: int, title="d") -> Document:
    return Document.create(title, " ".join(f"w{i}" for i in range(n_tokens)))


def reconstruct(chunks, overlap):
    tokens = []
    for i, c in enumerate(chunks):
        words = c.text.split()
        tokens.extend(words if i == 0 else words[overlap:])
    return tokens


# -- model ------------------------------------------------------------------


def test_entity_key_examples():
    assert normalize_entity_key("Kevin Scott", "person") == EntityKey("kevin scott", "person")
    assert normalize_entity_key("  KEVIN   SCOTT ", "person") == EntityKey("kevin scott", "person")
    with pytest.raises(EmptyName):
        normalize_entity_key("", "person")
    with pytest.raises(EmptyName):
        normalize_entity_key("   ", "person")


@given(st.text(min_size=1).filter(lambda s: s.strip()), st.text())
def test_entity_key_idempotent(name, type_):
    k = normalize_entity_key(name, type_)
    assert normalize_entity_key(k.normalized_name, k.type) == k


def test_content_ids_are_stable():
    assert content_id("x", "a", 1) == content_id("x", "a", 1)
    assert content_id("x", "a", 1) != content_id("x", "a1")
    assert Document.create("t", "body").id == Document.create("t", "body").id


def test_claim_dates_validated():
    ClaimInstance("c", "S", "O", "T", "d", "span", "2020-01-01", "2020-02-01")
    with pytest.raises(ValueError):
        ClaimInstance("c", "S", "O", "T", "d", "span", "2021-01-01", "2020-02-01")
    with pytest.raises(ValueError):
        ClaimInstance("c", " ", "O", "T", "d", "span")


def test_document_requires_text():
    with pytest.raises(ValueError):
        Document.create("t", "  \n")


# -- chunker examples -------------------------------------------------------


def test_short_document_is_one_chunk():
    chunks = chunk_document(doc_of(300), ChunkingConfig(600, 100), WS)
    assert len(chunks) == 1 and chunks[0].token_count == 300


def test_thousand_tokens_gives_two_chunks():
    d = doc_of(1000)
    chunks = chunk_document(d, ChunkingConfig(600, 100), WS)
    tokens = d.text.split()
    assert [c.text.split() for c in chunks] == [tokens[0:600], tokens[500:1000]]
    assert [c.token_count for c in chunks] == [600, 500]
    assert [c.overlap_tokens for c in chunks] == [0, 100]
    assert [c.start_token for c in chunks] == [0, 500]


def test_million_token_document_chunk_count():
    cfg = ChunkingConfig(600, 100)
    # ceil(999900 / 500) = ceil(1999.8) = 2000
    assert expected_chunk_count(1_000_000, cfg) == math.ceil((10**6 - 100) / 500) == 2000
    chunks = chunk_document(doc_of(1_000_000), cfg, WS)
    assert len(chunks) == 2000
    assert all(c.token_count == 600 for c in chunks[:-1])
    assert chunks[-1].start_token + chunks[-1].token_count == 1_000_000
    # one window fewer would stop 400 tokens short of the end
    assert (1999 - 1) * 500 + 600 == 999_600


def test_invalid_configs():
    for size, overlap in [(100, 100), (100, 150), (100, -1), (0, 0)]:
        with pytest.raises(InvalidConfig):
            ChunkingConfig(size, overlap)


def test_ids_deterministic_and_distinct():
    d = doc_of(2000)
    a = chunk_document(d, ChunkingConfig(300, 50), WS)
    b = chunk_document(d, ChunkingConfig(300, 50), WS)
    assert [c.id for c in a] == [c.id for c in b]
    assert len({c.id for c in a}) == len(a)


def test_corpus_keeps_document_order():
    docs = [doc_of(50, "a"), doc_of(70, "b")]
    chunks = chunk_corpus(docs, ChunkingConfig(30, 10), WS)
    assert [c.document_id for c in chunks] == [docs[0].id] * 2 + [docs[1].id] * 3


# -- properties -------------------------------------------------------------


@settings(max_examples=1000, deadline=None)
@given(
    n_tokens=st.integers(1, 400),
    size=st.integers(2, 80),
    overlap_frac=st.floats(0, 0.95),
)
def test_reconstruction_and_count(n_tokens, size, overlap_frac):
    overlap = min(size - 1, int(size * overlap_frac))
    cfg = ChunkingConfig(size, overlap)
    d = doc_of(n_tokens)
    chunks = chunk_document(d, cfg, WS)
    assert len(chunks) == max(1, math.ceil((n_tokens - overlap) / (size - overlap)))
    assert reconstruct(chunks, overlap) == d.text.split()
    assert all(c.token_count == size for c in chunks[:-1])
    assert all(0 < c.token_count <= size for c in chunks)
    for a, b in zip(chunks, chunks[1:]):
        assert a.text.split()[-overlap:] == b.text.split()[:overlap] or overlap == 0


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_regex_codec_chunks_cover_text(text):
    codec = RegexCodec()
    chunks = chunk_document(Document.create("t", text), ChunkingConfig(8, 2), codec)
    rebuilt = chunks[0].text + "".join(codec.decode(codec.encode(c.text)[2:]) for c in chunks[1:])
    assert rebuilt == text
