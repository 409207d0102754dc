"""Retrieval-augmented chat engine for topic-organized document corpora."""

from .corpus import (
    Chunk,
    CorpusStats,
    Document,
    Topic,
    chunk_corpus,
    chunk_document,
    corpus_stats,
    load_corpus,
)
from .embedding import (
    EmbeddingClient,
    EmbeddingProviderConfig,
    EmbeddingVector,
    HashedTrigramEmbedder,
    normalize,
)
from .llm import Completion, LlmClient, LlmProviderConfig
from .rag import (
    Answer,
    ChunkCatalog,
    Prompt,
    RagParams,
    RagPipeline,
    answer_query,
    build_prompt,
    retrieve,
)
from .vectorstore import (
    FlatIndex,
    IndexEntry,
    IvfIndex,
    SearchHit,
    build_flat,
    build_ivf,
    cosine,
    load,
    save,
    search,
)

__version__ = "0.1.0"
