"""Query orchestration: embed the query, retrieve and threshold chunks,
assemble the structured prompt, call the model, and cite sources; falls
back to model-internal knowledge when nothing relevant is retrieved."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Chunk, Document, Topic
from .embedding import EmbeddingClient, EmbeddingError
from .llm import LlmClient, LlmError
from .vectorstore import FlatIndex, IndexError_, IvfIndex, SearchHit, search

DEFAULT_TOP_K = 5
DEFAULT_RELEVANCE_THRESHOLD = 0.25
DEFAULT_MAX_CONTEXT_CHARS = 6000
MAX_QUERY_CHARS = 8192

SYSTEM_TEXT_WITH_CONTEXT = (
    "Answer using only the provided context. Cite sources. "
    "If the context is insufficient, say so."
)
SYSTEM_TEXT_FALLBACK = (
    "No reference material was retrieved. Answer from your general "
    "knowledge and state that no sources were found."
)


class RagError(Exception):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, message: str, stage: str):
        super().__init__(message)
        self.stage = stage


@dataclass
class RagParams:
    top_k: int = DEFAULT_TOP_K
    relevance_threshold: float = DEFAULT_RELEVANCE_THRESHOLD
    max_context_chars: int = DEFAULT_MAX_CONTEXT_CHARS

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        # values above 1 are allowed: they deliberately force fallback
        if self.relevance_threshold < -1.0:
            raise ValueError("relevance_threshold below -1")
        if self.max_context_chars <= 0:
            raise ValueError("max_context_chars must be positive")


@dataclass(frozen=True)
class ContextBlock:
    chunk_id: str
    doc_title: str
    section_path: tuple[str, ...]
    score: float
    text: str


@dataclass(frozen=True)
class Prompt:
    system_text: str
    context_blocks: tuple[ContextBlock, ...]
    query: str

    def render_user_message(self) -> str:
        parts = []
        for block in self.context_blocks:
            section = " / ".join((block.doc_title,) + block.section_path)
            parts.append(f"[Source: {section}]\n{block.text}")
        parts.append(f"Question: {self.query}")
        return "\n\n".join(parts)


@dataclass(frozen=True)
class Citation:
    chunk_id: str
    doc_title: str
    section_path: tuple[str, ...]
    score: float

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_title": self.doc_title,
            "section_path": list(self.section_path),
            "score": self.score,
        }


@dataclass(frozen=True)
class Answer:
    text: str
    citations: tuple[Citation, ...]
    used_fallback: bool
    provider_id: str
    latency_ms: int
    retrieved_k: int

    def to_dict(self) -> dict:
        return {
            "answer": self.text,
            "citations": [c.to_dict() for c in self.citations],
            "used_fallback": self.used_fallback,
            "provider_id": self.provider_id,
            "latency_ms": self.latency_ms,
            "retrieved_k": self.retrieved_k,
        }


class ChunkCatalog:
    """Chunk texts and document titles keyed by chunk id, with JSONL
    persistence alongside the binary index."""

    def __init__(self, chunks: list[Chunk], doc_titles: dict[str, str]):
        self._chunks = {c.id: c for c in chunks}
        self._doc_titles = dict(doc_titles)

    @classmethod
    def from_documents(cls, docs: list[Document], chunks: list[Chunk]) -> "ChunkCatalog":
        return cls(chunks, {d.id: d.title for d in docs})

    def __len__(self) -> int:
        return len(self._chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._chunks

    def get(self, chunk_id: str) -> Chunk:
        if chunk_id not in self._chunks:
            raise KeyError(f"unknown chunk id {chunk_id!r}")
        return self._chunks[chunk_id]

    def doc_title(self, doc_id: str) -> str:
        return self._doc_titles.get(doc_id, doc_id)

    def chunk_ids(self) -> list[str]:
        return list(self._chunks)

    def chunks(self) -> list[Chunk]:
        return list(self._chunks.values())

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for chunk in self._chunks.values():
                fh.write(json.dumps({
                    "id": chunk.id,
                    "doc_id": chunk.doc_id,
                    "ordinal": chunk.ordinal,
                    "topic": chunk.topic.label,
                    "section_path": list(chunk.section_path),
                    "text": chunk.text,
                    "span": list(chunk.span),
                    "doc_title": self._doc_titles.get(chunk.doc_id, chunk.doc_id),
                }) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ChunkCatalog":
        chunks: list[Chunk] = []
        titles: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                chunks.append(Chunk(
                    id=rec["id"],
                    doc_id=rec["doc_id"],
                    ordinal=rec["ordinal"],
                    topic=Topic(rec["topic"]),
                    section_path=tuple(rec["section_path"]),
                    text=rec["text"],
                    span=tuple(rec["span"]),
                ))
                titles[rec["doc_id"]] = rec["doc_title"]
        return cls(chunks, titles)


def catalog_path_for(index_path: str | Path) -> Path:
    return Path(str(index_path) + ".chunks.jsonl")


def retrieve(
    query: str,
    params: RagParams,
    index: FlatIndex | IvfIndex,
    embedder: EmbeddingClient,
    nprobe: int | None = None,
) -> list[SearchHit]:
    """Top-k hits for the query that clear the relevance threshold."""
    if not query:
        raise RagError("query must be non-empty", stage="embed")
    if embedder.provider_id != index.provider_id:
        raise RagError(
            f"index was built with provider {index.provider_id!r} but the "
            f"query embedder is {embedder.provider_id!r}",
            stage="embed",
        )
    try:
        qvec = embedder.embed_one(query)
    except EmbeddingError as exc:
        raise RagError(str(exc), stage="embed") from exc
    try:
        if isinstance(index, IvfIndex):
            probe = min(nprobe, index.nlist) if nprobe else min(8, index.nlist)
            hits = search(index, qvec, params.top_k, nprobe=probe)
        else:
            hits = search(index, qvec, params.top_k)
    except IndexError_ as exc:
        raise RagError(str(exc), stage="search") from exc
    return [h for h in hits if h.score >= params.relevance_threshold]


def build_prompt(
    query: str,
    hits: list[SearchHit],
    catalog: ChunkCatalog,
    params: RagParams,
) -> Prompt:
    """Greedy whole-block context packing in score order; zero hits yield
    the fallback prompt variant."""
    if not query:
        raise RagError("query must be non-empty", stage="search")
    blocks: list[ContextBlock] = []
    used = 0
    for hit in hits:
        try:
            chunk = catalog.get(hit.chunk_id)
        except KeyError as exc:
            raise RagError(str(exc), stage="search") from exc
        if used + len(chunk.text) > params.max_context_chars:
            break
        used += len(chunk.text)
        blocks.append(ContextBlock(
            chunk_id=chunk.id,
            doc_title=catalog.doc_title(chunk.doc_id),
            section_path=chunk.section_path,
            score=hit.score,
            text=chunk.text,
        ))
    system_text = SYSTEM_TEXT_WITH_CONTEXT if blocks else SYSTEM_TEXT_FALLBACK
    return Prompt(system_text=system_text, context_blocks=tuple(blocks), query=query)


@dataclass
class RagPipeline:
    """Immutable bundle of index + catalog + providers for answering queries."""

    index: FlatIndex | IvfIndex
    catalog: ChunkCatalog
    embedder: EmbeddingClient
    llm: LlmClient
    params: RagParams = field(default_factory=RagParams)

    def answer_query(self, query: str, params: RagParams | None = None) -> Answer:
        return answer_query(
            query, params or self.params, self.index, self.catalog,
            self.embedder, self.llm,
        )


def answer_query(
    query: str,
    params: RagParams,
    index: FlatIndex | IvfIndex,
    catalog: ChunkCatalog,
    embedder: EmbeddingClient,
    llm: LlmClient,
) -> Answer:
    if not query:
        raise RagError("query must be non-empty", stage="embed")
    if len(query) > MAX_QUERY_CHARS:
        raise RagError(f"query exceeds {MAX_QUERY_CHARS} characters", stage="embed")
    start = time.monotonic()
    hits = retrieve(query, params, index, embedder)
    prompt = build_prompt(query, hits, catalog, params)
    try:
        completion = llm.complete(prompt)
    except LlmError as exc:
        raise RagError(str(exc), stage="complete") from exc
    latency_ms = int((time.monotonic() - start) * 1000)
    citations = tuple(
        Citation(
            chunk_id=b.chunk_id,
            doc_title=b.doc_title,
            section_path=b.section_path,
            score=b.score,
        )
        for b in prompt.context_blocks
    )
    return Answer(
        text=completion.text,
        citations=citations,
        used_fallback=not citations,
        provider_id=completion.provider_id,
        latency_ms=latency_ms,
        retrieved_k=len(hits),
    )
