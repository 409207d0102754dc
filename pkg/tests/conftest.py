from __future__ import annotations

from pathlib import Path

import pytest

from agrirag.corpus import chunk_corpus, load_corpus
from agrirag.embedding import EmbeddingClient, EmbeddingProviderConfig
from agrirag.llm import LlmClient, LlmProviderConfig
from agrirag.rag import ChunkCatalog, RagParams, RagPipeline
from agrirag.vectorstore import build_flat, entries_from

ASSETS = Path(__file__).resolve().parents[1] / "src" / "agrirag" / "assets"

EMBED_DIM = 256


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return ASSETS / "corpus"


@pytest.fixture(scope="session")
def question_bank_path() -> Path:
    return ASSETS / "questions.jsonl"


@pytest.fixture(scope="session")
def mini_docs(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture(scope="session")
def mini_chunks(mini_docs):
    return chunk_corpus(mini_docs)


@pytest.fixture(scope="session")
def local_embedder() -> EmbeddingClient:
    return EmbeddingClient(EmbeddingProviderConfig(provider_id="local", dim=EMBED_DIM))


@pytest.fixture(scope="session")
def mini_index(mini_chunks, local_embedder):
    vectors = local_embedder.embed_batch([c.text for c in mini_chunks])
    return build_flat(entries_from([c.id for c in mini_chunks], vectors))


@pytest.fixture(scope="session")
def mini_catalog(mini_docs, mini_chunks) -> ChunkCatalog:
    return ChunkCatalog.from_documents(mini_docs, mini_chunks)


def make_llm(endpoint: str) -> LlmClient:
    name = endpoint.removeprefix("mock-")
    return LlmClient(LlmProviderConfig(provider_id=name, endpoint=endpoint))


@pytest.fixture(scope="session")
def extractive_pipeline(mini_index, mini_catalog, local_embedder) -> RagPipeline:
    return RagPipeline(
        index=mini_index,
        catalog=mini_catalog,
        embedder=local_embedder,
        llm=make_llm("mock-extractive"),
        params=RagParams(),
    )


@pytest.fixture(scope="session")
def echo_pipeline(mini_index, mini_catalog, local_embedder) -> RagPipeline:
    return RagPipeline(
        index=mini_index,
        catalog=mini_catalog,
        embedder=local_embedder,
        llm=make_llm("mock-echo"),
        params=RagParams(),
    )
