"""Self-built cosine-similarity vector index: exact flat search, IVF
approximate search via seeded spherical k-means, and checksummed binary
persistence."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import EmbeddingVector, normalize

MAGIC = b"AGRX"
FORMAT_VERSION = 1
KIND_FLAT = 0
KIND_IVF = 1

KMEANS_MAX_ITERS = 25
KMEANS_TOLERANCE = 1e-4

DEFAULT_NPROBE = 8


class IndexError_(Exception):
    """Vector index build/search/persistence failure."""


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float


class FlatIndex:
    """Exhaustive exact-search index over unit vectors."""

    kind = KIND_FLAT

    def __init__(self, ids: list[str], matrix: np.ndarray, provider_id: str):
        self.ids = list(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.provider_id = provider_id
        self._id_array = np.asarray(self.ids)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


class IvfIndex:
    """Inverted-file index: entries bucketed under their nearest centroid,
    search probes only the nprobe closest buckets."""

    kind = KIND_IVF

    def __init__(
        self,
        ids: list[str],
        matrix: np.ndarray,
        provider_id: str,
        centroids: np.ndarray,
        assignments: np.ndarray,
        build_seed: int,
    ):
        self.ids = list(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.provider_id = provider_id
        self.centroids = np.ascontiguousarray(centroids, dtype=np.float32)
        self.assignments = np.asarray(assignments, dtype=np.uint32)
        self.build_seed = build_seed
        self._id_array = np.asarray(self.ids)
        self._lists = [
            np.flatnonzero(self.assignments == c) for c in range(self.nlist)
        ]

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def nlist(self) -> int:
        return int(self.centroids.shape[0])

    def __len__(self) -> int:
        return len(self.ids)


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Dot product of two unit vectors."""
    if u.dim != v.dim:
        raise IndexError_(f"dimension mismatch: {u.dim} vs {v.dim}")
    return float(np.dot(u.values, v.values))


def _stack_entries(entries: list[IndexEntry]) -> tuple[list[str], np.ndarray, str]:
    if not entries:
        raise IndexError_("cannot build an index from zero entries")
    dim = entries[0].vector.dim
    provider_id = entries[0].vector.provider_id
    seen: set[str] = set()
    for e in entries:
        if e.vector.dim != dim:
            raise IndexError_(
                f"entry {e.chunk_id!r} has dim {e.vector.dim}, expected {dim}"
            )
        if e.vector.provider_id != provider_id:
            raise IndexError_(
                f"entry {e.chunk_id!r} embedded by {e.vector.provider_id!r}, "
                f"expected {provider_id!r}"
            )
        if e.chunk_id in seen:
            raise IndexError_(f"duplicate chunk id {e.chunk_id!r}")
        seen.add(e.chunk_id)
    matrix = np.stack([e.vector.values for e in entries])
    return [e.chunk_id for e in entries], matrix, provider_id


def build_flat(entries: list[IndexEntry]) -> FlatIndex:
    ids, matrix, provider_id = _stack_entries(entries)
    return FlatIndex(ids, matrix, provider_id)


def build_ivf(entries: list[IndexEntry], nlist: int, seed: int = 0) -> IvfIndex:
    ids, matrix, provider_id = _stack_entries(entries)
    if not 1 <= nlist <= len(entries):
        raise IndexError_(f"nlist must be in [1, {len(entries)}], got {nlist}")
    centroids, assignments = _spherical_kmeans(matrix, nlist, seed)
    return IvfIndex(ids, matrix, provider_id, centroids, assignments, seed)


def default_nlist(n: int) -> int:
    return int(np.ceil(np.sqrt(n)))


def _spherical_kmeans(
    matrix: np.ndarray, k: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded spherical k-means with k-means++-style initialization.

    Runs at most KMEANS_MAX_ITERS Lloyd iterations, stopping early when
    centroid movement drops below KMEANS_TOLERANCE. Empty clusters are
    repaired by stealing the point farthest from its assigned centroid.
    """
    n = matrix.shape[0]
    rng = np.random.default_rng(seed)
    X = matrix.astype(np.float64)

    centroids = np.empty((k, matrix.shape[1]), dtype=np.float64)
    centroids[0] = X[rng.integers(n)]
    best_sim = X @ centroids[0]
    for c in range(1, k):
        weights = np.maximum(1.0 - best_sim, 0.0) ** 2
        total = weights.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=weights / total))
        centroids[c] = X[idx]
        best_sim = np.maximum(best_sim, X @ centroids[c])

    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITERS):
        sims = X @ centroids.T
        assignments = np.argmax(sims, axis=1)
        own_sim = sims[np.arange(n), assignments]

        new_centroids = centroids.copy()
        for c in range(k):
            members = np.flatnonzero(assignments == c)
            if members.size == 0:
                thief = int(np.argmin(own_sim))
                new_centroids[c] = X[thief]
                assignments[thief] = c
                own_sim[thief] = 1.0
                continue
            mean = X[members].sum(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                new_centroids[c] = mean / norm
        movement = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if movement < KMEANS_TOLERANCE:
            break

    # Final assignment pass so every entry sits under its nearest centroid.
    sims = X @ centroids.T
    assignments = np.argmax(sims, axis=1)
    for c in range(k):
        if not np.any(assignments == c):
            own_sim = sims[np.arange(n), assignments]
            thief = int(np.argmin(own_sim))
            assignments[thief] = c
    return centroids.astype(np.float32), assignments.astype(np.uint32)


def _top_k(
    scores: np.ndarray, id_array: np.ndarray, candidate_rows: np.ndarray, k: int
) -> list[SearchHit]:
    # Sort by score descending, chunk_id ascending on ties.
    order = np.lexsort((id_array[candidate_rows], -scores))
    top = candidate_rows[order[:k]]
    return [
        SearchHit(chunk_id=str(id_array[row]), score=float(scores[order[i]]))
        for i, row in enumerate(top)
    ]


def search(
    index: FlatIndex | IvfIndex,
    query: EmbeddingVector,
    k: int,
    nprobe: int = DEFAULT_NPROBE,
) -> list[SearchHit]:
    """Top-k cosine search; exact for flat, probe-limited for IVF."""
    if k < 1:
        raise IndexError_("k must be >= 1")
    if query.dim != index.dim:
        raise IndexError_(f"query dim {query.dim} != index dim {index.dim}")
    q = query.values
    if isinstance(index, FlatIndex):
        scores = index.matrix @ q
        rows = np.arange(len(index.ids))
        return _top_k(scores, index._id_array, rows, k)
    if not 1 <= nprobe <= index.nlist:
        raise IndexError_(f"nprobe must be in [1, {index.nlist}], got {nprobe}")
    centroid_scores = index.centroids @ q
    probe_order = np.lexsort((np.arange(index.nlist), -centroid_scores))
    candidate_rows = np.concatenate(
        [index._lists[c] for c in probe_order[:nprobe]]
    ).astype(np.int64)
    if candidate_rows.size == 0:
        return []
    scores = index.matrix[candidate_rows] @ q
    return _top_k(scores, index._id_array, candidate_rows, k)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexError_("truncated index file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def take_str(self) -> str:
        (length,) = self.unpack("<I")
        return self.take(length).decode("utf-8")


def save(index: FlatIndex | IvfIndex, path: str | Path) -> None:
    """Serialize an index: AGRX header, little-endian payload, trailing CRC32."""
    parts = [
        MAGIC,
        struct.pack("<HBIQ", FORMAT_VERSION, index.kind, index.dim, len(index)),
        _pack_str(index.provider_id),
    ]
    if isinstance(index, IvfIndex):
        parts.append(struct.pack("<IQ", index.nlist, index.build_seed))
        parts.append(index.centroids.astype("<f4").tobytes())
        for i, chunk_id in enumerate(index.ids):
            parts.append(_pack_str(chunk_id))
            parts.append(struct.pack("<I", int(index.assignments[i])))
            parts.append(index.matrix[i].astype("<f4").tobytes())
    else:
        for i, chunk_id in enumerate(index.ids):
            parts.append(_pack_str(chunk_id))
            parts.append(index.matrix[i].astype("<f4").tobytes())
    body = b"".join(parts)
    body += struct.pack("<I", zlib.crc32(body))
    Path(path).write_bytes(body)


def load(path: str | Path) -> FlatIndex | IvfIndex:
    data = Path(path).read_bytes()
    if len(data) < 4 + struct.calcsize("<HBIQ") + 4:
        raise IndexError_("truncated index file")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise IndexError_(
            f"checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )
    r = _Reader(data[:-4])
    if r.take(4) != MAGIC:
        raise IndexError_("bad magic; not an index file")
    version, kind, dim, count = r.unpack("<HBIQ")
    if version != FORMAT_VERSION:
        raise IndexError_(f"unsupported index version {version}")
    provider_id = r.take_str()
    if kind == KIND_IVF:
        nlist, build_seed = r.unpack("<IQ")
        centroids = np.frombuffer(
            r.take(4 * nlist * dim), dtype="<f4"
        ).reshape(nlist, dim)
        ids, assignments, rows = [], [], []
        for _ in range(count):
            ids.append(r.take_str())
            assignments.append(r.unpack("<I")[0])
            rows.append(np.frombuffer(r.take(4 * dim), dtype="<f4"))
        return IvfIndex(
            ids, np.stack(rows), provider_id, centroids,
            np.asarray(assignments, dtype=np.uint32), build_seed,
        )
    if kind == KIND_FLAT:
        ids, rows = [], []
        for _ in range(count):
            ids.append(r.take_str())
            rows.append(np.frombuffer(r.take(4 * dim), dtype="<f4"))
        return FlatIndex(ids, np.stack(rows), provider_id)
    raise IndexError_(f"unknown index kind {kind}")


def entries_from(
    chunk_ids: list[str], vectors: list[EmbeddingVector]
) -> list[IndexEntry]:
    if len(chunk_ids) != len(vectors):
        raise IndexError_("chunk id / vector count mismatch")
    return [IndexEntry(cid, vec) for cid, vec in zip(chunk_ids, vectors)]
