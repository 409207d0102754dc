"""Service/CLI configuration: one TOML document, env vars for secrets only."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .embedding import EmbeddingProviderConfig
from .llm import LlmProviderConfig
from .rag import RagParams

DEFAULT_BODY_LIMIT = 64 * 1024
DEFAULT_REQUEST_TIMEOUT_S = 60


class ConfigError(Exception):
    pass


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    corpus_path: str | None = None
    index_path: str | None = None
    eval_report_path: str | None = None
    active_embedding_provider: str = "local"
    active_llm_provider: str = "extractive"
    rag_params: RagParams = field(default_factory=RagParams)
    embedding_providers: dict[str, EmbeddingProviderConfig] = field(default_factory=dict)
    llm_providers: dict[str, LlmProviderConfig] = field(default_factory=dict)
    body_limit_bytes: int = DEFAULT_BODY_LIMIT
    request_timeout_s: int = DEFAULT_REQUEST_TIMEOUT_S
    cors_origins: list[str] = field(default_factory=lambda: ["*"])

    def __post_init__(self) -> None:
        if not self.embedding_providers:
            self.embedding_providers = {
                "local": EmbeddingProviderConfig(provider_id="local", dim=256)
            }
        if not self.llm_providers:
            self.llm_providers = {
                "extractive": LlmProviderConfig(
                    provider_id="extractive", endpoint="mock-extractive"
                ),
                "echo": LlmProviderConfig(provider_id="echo", endpoint="mock-echo"),
            }
        if self.active_embedding_provider not in self.embedding_providers:
            raise ConfigError(
                f"active embedding provider {self.active_embedding_provider!r} "
                f"is not configured"
            )
        if self.active_llm_provider not in self.llm_providers:
            raise ConfigError(
                f"active llm provider {self.active_llm_provider!r} is not configured"
            )


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ServiceConfig:
    server = raw.get("server", {})
    rag = raw.get("rag", {})
    embedding_providers = {
        name: EmbeddingProviderConfig(provider_id=name, **cfg)
        for name, cfg in raw.get("embedding_providers", {}).items()
    }
    llm_providers = {
        name: LlmProviderConfig(provider_id=name, **cfg)
        for name, cfg in raw.get("llm_providers", {}).items()
    }
    try:
        return ServiceConfig(
            host=server.get("host", "127.0.0.1"),
            port=server.get("port", 8080),
            corpus_path=raw.get("corpus_path"),
            index_path=raw.get("index_path"),
            eval_report_path=raw.get("eval_report_path"),
            active_embedding_provider=raw.get("active_embedding_provider", "local"),
            active_llm_provider=raw.get("active_llm_provider", "extractive"),
            rag_params=RagParams(
                top_k=rag.get("top_k", RagParams().top_k),
                relevance_threshold=rag.get(
                    "relevance_threshold", RagParams().relevance_threshold
                ),
                max_context_chars=rag.get(
                    "max_context_chars", RagParams().max_context_chars
                ),
            ),
            embedding_providers=embedding_providers,
            llm_providers=llm_providers,
            body_limit_bytes=server.get("body_limit_bytes", DEFAULT_BODY_LIMIT),
            request_timeout_s=server.get("request_timeout_s", DEFAULT_REQUEST_TIMEOUT_S),
            cors_origins=list(server.get("cors_origins", ["*"])),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc
