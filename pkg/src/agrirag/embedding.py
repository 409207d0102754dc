"""Text embedding providers: a deterministic local hashed-trigram embedder
and an HTTP client for remote embedding APIs. All vectors are L2-normalized
float32 so cosine similarity reduces to a dot product."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import httpx
import numpy as np

LOCAL_ENDPOINT = "local"

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY_S = 0.25

NORM_TOLERANCE = 1e-6


class EmbeddingError(Exception):
    """Embedding failure; `retryable` marks transient provider errors."""

    def __init__(self, message: str, retryable: bool = False, status: int | None = None):
        super().__init__(message)
        self.retryable = retryable
        self.status = status


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray  # float32, unit L2 norm
    provider_id: str

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 1 or v.dtype != np.float32:
            raise ValueError("embedding values must be a 1-D float32 array")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding contains NaN or Inf")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"embedding is not unit-norm (norm={norm})")


@dataclass
class EmbeddingProviderConfig:
    provider_id: str
    endpoint: str = LOCAL_ENDPOINT
    model_name: str = "hashed-trigram"
    dim: int = 768
    auth_env: str | None = None
    timeout_ms: int = 30_000
    max_batch: int = 64

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


def normalize(values: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm. Rejects the zero vector."""
    values = np.asarray(values, dtype=np.float32)
    norm = float(np.linalg.norm(values.astype(np.float64)))
    if norm == 0.0:
        raise ValueError("cannot normalize zero vector")
    return (values / norm).astype(np.float32)


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def _fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


def hashed_trigram_vector(text: str, dim: int) -> np.ndarray:
    """Bucketed character-trigram counts of the lowercased text, unit-normalized.

    Texts shorter than three characters hash as a single gram so every
    non-empty input still yields a nonzero vector.
    """
    lowered = text.lower()
    counts = np.zeros(dim, dtype=np.float64)
    if len(lowered) < 3:
        counts[_fnv1a_64(lowered.encode("utf-8")) % dim] += 1.0
    else:
        for i in range(len(lowered) - 2):
            counts[_fnv1a_64(lowered[i : i + 3].encode("utf-8")) % dim] += 1.0
    return normalize(counts)


class HashedTrigramEmbedder:
    """Local deterministic embedder with a transform-style estimator API.

    Stateless: fit is a no-op kept for pipeline compatibility.
    """

    def __init__(self, dim: int = 768):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def get_params(self, deep: bool = True) -> dict:
        return {"dim": self.dim}

    def set_params(self, **params) -> "HashedTrigramEmbedder":
        for key, value in params.items():
            if not hasattr(self, key):
                raise ValueError(f"invalid parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, texts: list[str] | None = None, y=None) -> "HashedTrigramEmbedder":
        return self

    def transform(self, texts: list[str]) -> np.ndarray:
        return np.stack([hashed_trigram_vector(t, self.dim) for t in texts])

    def fit_transform(self, texts: list[str], y=None) -> np.ndarray:
        return self.fit(texts).transform(texts)


@dataclass
class EmbeddingClient:
    """Batching front-end over a provider config; splits oversized batches
    and retries transient remote failures with exponential backoff."""

    config: EmbeddingProviderConfig
    _local: HashedTrigramEmbedder | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.config.endpoint == LOCAL_ENDPOINT:
            self._local = HashedTrigramEmbedder(self.config.dim)

    @property
    def provider_id(self) -> str:
        return self.config.provider_id

    @property
    def dim(self) -> int:
        return self.config.dim

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        for i, text in enumerate(texts):
            if not text:
                raise EmbeddingError(f"empty text at index {i}")
        vectors: list[EmbeddingVector] = []
        for start in range(0, len(texts), self.config.max_batch):
            batch = texts[start : start + self.config.max_batch]
            vectors.extend(self._embed_one_batch(batch))
        return vectors

    def embed_one(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def _embed_one_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        if self._local is not None:
            matrix = self._local.transform(texts)
        else:
            matrix = self._request_remote(texts)
        out = []
        for row in matrix:
            if row.shape[0] != self.config.dim:
                raise EmbeddingError(
                    f"provider returned dim {row.shape[0]}, config says {self.config.dim}"
                )
            out.append(
                EmbeddingVector(values=normalize(row), provider_id=self.config.provider_id)
            )
        return out

    def _request_remote(self, texts: list[str]) -> np.ndarray:
        headers = {}
        if self.config.auth_env:
            secret = os.environ.get(self.config.auth_env)
            if not secret:
                raise EmbeddingError(
                    f"auth env var {self.config.auth_env!r} is not set"
                )
            headers["Authorization"] = f"Bearer {secret}"
        payload = {"model": self.config.model_name, "input": texts}
        last_error: EmbeddingError | None = None
        for attempt in range(RETRY_ATTEMPTS):
            if attempt:
                time.sleep(RETRY_BASE_DELAY_S * 2 ** (attempt - 1))
            try:
                resp = httpx.post(
                    self.config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout_ms / 1000,
                )
            except httpx.HTTPError as exc:
                last_error = EmbeddingError(f"embedding request failed: {exc}", retryable=True)
                continue
            if resp.status_code >= 500:
                last_error = EmbeddingError(
                    f"embedding provider error {resp.status_code}",
                    retryable=True,
                    status=resp.status_code,
                )
                continue
            if resp.status_code != 200:
                raise EmbeddingError(
                    f"embedding provider error {resp.status_code}",
                    status=resp.status_code,
                )
            data = resp.json()["data"]
            rows = [None] * len(texts)
            for item in data:
                rows[item["index"]] = np.asarray(item["embedding"], dtype=np.float32)
            if any(r is None for r in rows):
                raise EmbeddingError("provider response missing items")
            return np.stack(rows)
        assert last_error is not None
        raise last_error
