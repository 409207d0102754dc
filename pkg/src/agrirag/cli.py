"""Operator CLI: ingest/build, query, eval, stats, serve.

JSON results go to stdout; diagnostics to stderr. Exit codes: 0 success,
1 usage error, 2 data error, 3 provider error, 4 acceptance-threshold
failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from .config import ConfigError, ServiceConfig, load_config
from .embedding import EmbeddingClient, EmbeddingError, EmbeddingProviderConfig
from .evaluation import (
    Criterion,
    EvalError,
    load_question_bank,
    render_performance_table,
    render_quality_table,
    run_benchmark,
)
from .llm import LlmClient, LlmError, LlmProviderConfig
from .rag import (
    ChunkCatalog,
    RagError,
    RagParams,
    RagPipeline,
    answer_query,
    catalog_path_for,
)
from .vectorstore import (
    IndexError_,
    build_flat,
    build_ivf,
    entries_from,
    load as load_index,
    save as save_index,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3
EXIT_THRESHOLD = 4


class DataError(Exception):
    pass


class ProviderError(Exception):
    pass


class ThresholdError(Exception):
    pass


def _config_or_default(config_path: str | None) -> ServiceConfig:
    if config_path:
        return load_config(config_path)
    return ServiceConfig()


def _embedder(cfg: ServiceConfig, provider: str | None, dim: int | None) -> EmbeddingClient:
    name = provider or cfg.active_embedding_provider
    if name not in cfg.embedding_providers:
        raise click.UsageError(f"unknown embedding provider {name!r}")
    provider_cfg = cfg.embedding_providers[name]
    if dim and provider_cfg.endpoint == "local":
        provider_cfg = EmbeddingProviderConfig(
            provider_id=provider_cfg.provider_id, endpoint="local", dim=dim
        )
    return EmbeddingClient(provider_cfg)


def _llm(cfg: ServiceConfig, provider: str | None) -> LlmClient:
    name = provider or cfg.active_llm_provider
    if name not in cfg.llm_providers:
        raise click.UsageError(f"unknown llm provider {name!r}")
    return LlmClient(cfg.llm_providers[name])


@click.group()
def cli() -> None:
    """Retrieval-augmented chat engine for topic-organized corpora."""


@cli.command()
@click.option("--corpus", "corpus_path", required=True, help="Corpus file or directory.")
@click.option("--out", "out_path", required=True, help="Index output file.")
@click.option("--config", "config_path", default=None, help="TOML config with providers.")
@click.option("--provider", default=None, help="Embedding provider id.")
@click.option("--dim", type=int, default=None, help="Local embedder dimension.")
@click.option("--chunk-size", type=int, default=corpus_mod.DEFAULT_CHUNK_SIZE)
@click.option("--overlap", type=int, default=corpus_mod.DEFAULT_OVERLAP)
@click.option("--ivf", is_flag=True, help="Build an IVF index instead of flat.")
@click.option("--nlist", type=int, default=None, help="IVF cluster count.")
@click.option("--seed", type=int, default=0, help="IVF build seed.")
def ingest(corpus_path, out_path, config_path, provider, dim, chunk_size, overlap,
           ivf, nlist, seed):
    """Chunk and embed a corpus, then write the index and chunk catalog."""
    if chunk_size <= 0 or overlap < 0 or overlap >= chunk_size:
        raise click.UsageError("--overlap must satisfy 0 <= overlap < --chunk-size")
    cfg = _config_or_default(config_path)
    try:
        docs = corpus_mod.load_corpus(corpus_path)
    except corpus_mod.CorpusError as exc:
        raise DataError(str(exc)) from exc
    if not docs:
        raise DataError(f"no documents found in {corpus_path}")
    chunks = corpus_mod.chunk_corpus(docs, chunk_size, overlap)
    embedder = _embedder(cfg, provider, dim)
    try:
        vectors = embedder.embed_batch([c.text for c in chunks])
    except EmbeddingError as exc:
        raise ProviderError(str(exc)) from exc
    entries = entries_from([c.id for c in chunks], vectors)
    try:
        if ivf:
            index = build_ivf(entries, nlist or max(1, int(len(entries) ** 0.5)), seed)
        else:
            index = build_flat(entries)
    except IndexError_ as exc:
        raise DataError(str(exc)) from exc
    save_index(index, out_path)
    ChunkCatalog.from_documents(docs, chunks).save(catalog_path_for(out_path))
    click.echo(json.dumps({
        "doc_count": len(docs),
        "chunk_count": len(chunks),
        "index_kind": "ivf" if ivf else "flat",
        "index_path": str(out_path),
    }))


@cli.command()
@click.option("--index", "index_path", required=True)
@click.option("--q", "query_text", required=True)
@click.option("--k", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--config", "config_path", default=None)
@click.option("--provider", default=None, help="Embedding provider id.")
@click.option("--llm", "llm_name", default=None, help="LLM provider id.")
def query(index_path, query_text, k, threshold, config_path, provider, llm_name):
    """Answer one query against a built index; prints the answer as JSON."""
    if not query_text.strip():
        raise click.UsageError("--q must be non-empty")
    cfg = _config_or_default(config_path)
    index, catalog = _load_index_pair(index_path)
    embedder = _embedder(cfg, provider, index.dim)
    llm = _llm(cfg, llm_name)
    params = RagParams(
        top_k=k or cfg.rag_params.top_k,
        relevance_threshold=(
            threshold if threshold is not None else cfg.rag_params.relevance_threshold
        ),
        max_context_chars=cfg.rag_params.max_context_chars,
    )
    try:
        answer = answer_query(query_text, params, index, catalog, embedder, llm)
    except RagError as exc:
        raise ProviderError(f"[{exc.stage}] {exc}") from exc
    click.echo(json.dumps(answer.to_dict()))


@cli.command("eval")
@click.option("--index", "index_path", required=True)
@click.option("--questions", "questions_path", required=True)
@click.option("--criterion", "criterion_spec", default="bleu_threshold:0.5",
              help="exact_match, citation_hit, or bleu_threshold:<t>.")
@click.option("--repeats", type=int, default=1)
@click.option("--recall-k", type=int, default=10)
@click.option("--min-recall", type=float, default=None)
@click.option("--min-mrr", type=float, default=None)
@click.option("--out", "out_prefix", default=None,
              help="Write <out>.json and <out>.txt report files.")
@click.option("--config", "config_path", default=None)
@click.option("--provider", default=None)
@click.option("--llm", "llm_name", default=None)
def eval_cmd(index_path, questions_path, criterion_spec, repeats, recall_k,
             min_recall, min_mrr, out_prefix, config_path, provider, llm_name):
    """Benchmark the pipeline over a question bank; prints the report JSON."""
    if repeats < 1:
        raise click.UsageError("--repeats must be >= 1")
    try:
        criterion = Criterion.parse(criterion_spec)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    cfg = _config_or_default(config_path)
    index, catalog = _load_index_pair(index_path)
    try:
        bank = load_question_bank(questions_path)
    except EvalError as exc:
        raise DataError(str(exc)) from exc
    pipeline = RagPipeline(
        index=index,
        catalog=catalog,
        embedder=_embedder(cfg, provider, index.dim),
        llm=_llm(cfg, llm_name),
        params=cfg.rag_params,
    )
    try:
        report = run_benchmark(bank, pipeline, criterion, repeats, recall_k)
    except EvalError as exc:
        raise DataError(str(exc)) from exc
    except RagError as exc:
        raise ProviderError(f"[{exc.stage}] {exc}") from exc
    tables = (
        render_quality_table(report.config_rows)
        + "\n\n"
        + render_performance_table(report)
    )
    click.echo(tables, err=True)
    if out_prefix:
        Path(out_prefix + ".json").write_text(
            json.dumps(report.to_dict(), indent=2), encoding="utf-8"
        )
        Path(out_prefix + ".txt").write_text(tables + "\n", encoding="utf-8")
    click.echo(json.dumps(report.to_dict()))
    row = report.config_rows[0]
    if min_recall is not None and row.recall < min_recall:
        raise ThresholdError(
            f"recall@{row.recall_k} {row.recall:.4f} below minimum {min_recall}"
        )
    if min_mrr is not None and row.mrr < min_mrr:
        raise ThresholdError(f"mrr {row.mrr:.4f} below minimum {min_mrr}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True)
@click.option("--chunk-size", type=int, default=corpus_mod.DEFAULT_CHUNK_SIZE)
@click.option("--overlap", type=int, default=corpus_mod.DEFAULT_OVERLAP)
@click.option("--key-terms", default="", help="Comma-separated terms to count.")
def stats(corpus_path, chunk_size, overlap, key_terms):
    """Corpus statistics as JSON."""
    try:
        docs = corpus_mod.load_corpus(corpus_path)
    except corpus_mod.CorpusError as exc:
        raise DataError(str(exc)) from exc
    chunks = corpus_mod.chunk_corpus(docs, chunk_size, overlap)
    terms = [t.strip() for t in key_terms.split(",") if t.strip()]
    click.echo(json.dumps(corpus_mod.corpus_stats(docs, chunks, terms).to_dict()))


@cli.command()
@click.option("--config", "config_path", required=True)
def serve(config_path):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    cfg = load_config(config_path)
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port)


def _load_index_pair(index_path: str):
    path = Path(index_path)
    if not path.is_file():
        raise DataError(f"index file not found: {path}")
    catalog_path = catalog_path_for(path)
    if not catalog_path.is_file():
        raise DataError(f"chunk catalog not found: {catalog_path}")
    try:
        return load_index(path), ChunkCatalog.load(catalog_path)
    except (IndexError_, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot load index: {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except ProviderError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_PROVIDER
    except ThresholdError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_THRESHOLD


if __name__ == "__main__":
    sys.exit(main())
