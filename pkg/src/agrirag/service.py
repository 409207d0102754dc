"""HTTP service: /v1/chat, /v1/ingest, /v1/health, /v1/corpus/stats,
/v1/eval/report. Chat is served against the current index while ingest
rebuilds off to the side and swaps it in atomically."""

from __future__ import annotations

import json
import threading
from pathlib import Path

import httpx
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from . import corpus as corpus_mod
from .config import ServiceConfig
from .embedding import EmbeddingClient, EmbeddingError, LOCAL_ENDPOINT
from .llm import LlmClient, LlmError, MOCK_ECHO, MOCK_EXTRACTIVE
from .rag import (
    ChunkCatalog,
    RagError,
    RagParams,
    answer_query,
    catalog_path_for,
)
from .vectorstore import build_flat, entries_from, load as load_index

MAX_QUERY_CHARS = 8192


class ServiceState:
    """Mutable runtime state; the index/catalog pair swaps atomically."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.index = None
        self.catalog: ChunkCatalog | None = None
        self.stats: dict | None = None
        self.ingest_lock = threading.Lock()
        self.embedder = EmbeddingClient(
            config.embedding_providers[config.active_embedding_provider]
        )
        self.llm = LlmClient(config.llm_providers[config.active_llm_provider])

    def load_persisted_index(self) -> None:
        if not self.config.index_path:
            return
        index_path = Path(self.config.index_path)
        catalog_path = catalog_path_for(index_path)
        if index_path.is_file() and catalog_path.is_file():
            index = load_index(index_path)
            catalog = ChunkCatalog.load(catalog_path)
            self.index, self.catalog = index, catalog


def _error(status: int, code: str, message: str, stage: str | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if stage:
        body["stage"] = stage
    return JSONResponse(status_code=status, content=body)


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="agrirag", version="1")
    state = ServiceState(config)
    state.load_persisted_index()
    app.state.rag = state

    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(Exception)
    async def unhandled(request: Request, exc: Exception):
        return _error(500, "internal_error", "internal server error")

    async def read_json_body(request: Request) -> dict | JSONResponse:
        body = await request.body()
        if len(body) > config.body_limit_bytes:
            return _error(400, "body_too_large",
                          f"request body exceeds {config.body_limit_bytes} bytes")
        try:
            parsed = json.loads(body or b"{}")
        except json.JSONDecodeError:
            return _error(400, "bad_json", "request body is not valid JSON")
        if not isinstance(parsed, dict):
            return _error(400, "bad_json", "request body must be a JSON object")
        return parsed

    @app.post("/v1/chat")
    async def chat(request: Request):
        body = await read_json_body(request)
        if isinstance(body, JSONResponse):
            return body
        query = body.get("query")
        if not isinstance(query, str) or not query.strip():
            return _error(400, "empty_query", "query must be a non-empty string")
        if len(query) > MAX_QUERY_CHARS:
            return _error(400, "query_too_long",
                          f"query exceeds {MAX_QUERY_CHARS} characters")
        index, catalog = state.index, state.catalog
        if index is None or catalog is None:
            return _error(503, "no_index", "no index loaded; ingest a corpus first")
        try:
            params = RagParams(
                top_k=int(body.get("top_k", config.rag_params.top_k)),
                relevance_threshold=float(
                    body.get("threshold", config.rag_params.relevance_threshold)
                ),
                max_context_chars=config.rag_params.max_context_chars,
            )
        except (TypeError, ValueError) as exc:
            return _error(400, "bad_params", str(exc))
        try:
            answer = await run_in_threadpool(
                answer_query, query, params, index, catalog,
                state.embedder, state.llm,
            )
        except RagError as exc:
            return _error(503, "provider_failure", str(exc), stage=exc.stage)
        except (EmbeddingError, LlmError) as exc:
            return _error(503, "provider_failure", str(exc))
        return JSONResponse(answer.to_dict())

    @app.post("/v1/ingest")
    async def ingest(request: Request):
        body = await read_json_body(request)
        if isinstance(body, JSONResponse):
            return body
        if not state.ingest_lock.acquire(blocking=False):
            return _error(409, "ingest_in_progress", "another ingest is running")
        try:
            return await run_in_threadpool(_run_ingest, state, body)
        finally:
            state.ingest_lock.release()

    @app.get("/v1/health")
    async def health():
        return {
            "status": "ok",
            "index_loaded": state.index is not None,
            "providers": [
                {"id": state.embedder.provider_id,
                 "reachable": _provider_reachable(state.embedder.config.endpoint)},
                {"id": state.llm.provider_id,
                 "reachable": _provider_reachable(state.llm.config.endpoint)},
            ],
        }

    @app.get("/v1/corpus/stats")
    async def corpus_stats():
        if state.stats is None:
            return _error(404, "no_corpus", "no corpus has been ingested")
        return state.stats

    @app.get("/v1/eval/report")
    async def eval_report():
        report = _load_eval_report(state)
        if report is None:
            return _error(404, "no_report", "no evaluation report available")
        return report

    return app


def _provider_reachable(endpoint: str) -> bool:
    if endpoint in (LOCAL_ENDPOINT, MOCK_ECHO, MOCK_EXTRACTIVE):
        return True
    try:
        httpx.head(endpoint, timeout=1.0)
        return True
    except httpx.HTTPError:
        return False


def _load_eval_report(state: ServiceState) -> dict | None:
    if getattr(state, "last_report", None) is not None:
        return state.last_report
    path = state.config.eval_report_path
    if path and Path(path).is_file():
        return json.loads(Path(path).read_text(encoding="utf-8"))
    return None


def _run_ingest(state: ServiceState, body: dict) -> JSONResponse:
    try:
        if "documents" in body:
            docs = [
                corpus_mod._document_from_record(rec, f"documents[{i}]")
                for i, rec in enumerate(body["documents"])
            ]
        else:
            corpus_path = body.get("corpus_path") or state.config.corpus_path
            if not corpus_path:
                return _error(400, "no_corpus_path",
                              "request has neither corpus_path nor documents")
            docs = corpus_mod.load_corpus(corpus_path)
    except (corpus_mod.CorpusError, ValueError, TypeError, KeyError) as exc:
        return _error(400, "malformed_corpus", str(exc))
    if not docs:
        return _error(400, "malformed_corpus", "corpus contains no documents")

    chunks = corpus_mod.chunk_corpus(docs)
    try:
        vectors = state.embedder.embed_batch([c.text for c in chunks])
        index = build_flat(entries_from([c.id for c in chunks], vectors))
    except EmbeddingError as exc:
        return _error(503, "provider_failure", str(exc), stage="embed")
    catalog = ChunkCatalog.from_documents(docs, chunks)

    if state.config.index_path:
        from .vectorstore import save
        save(index, state.config.index_path)
        catalog.save(catalog_path_for(state.config.index_path))

    # swap only after the rebuild fully succeeded
    state.index, state.catalog = index, catalog
    state.stats = corpus_mod.corpus_stats(docs, chunks).to_dict()
    return JSONResponse({
        "doc_count": len(docs),
        "chunk_count": len(chunks),
        "index_kind": "flat",
    })
