"""Corpus ingestion: documents, topics, overlapping chunks, and statistics."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

TOPIC_LIFE_SCIENCES = "agriculture_life_sciences"
TOPIC_MANAGEMENT = "agricultural_management"
TOPIC_FORESTRY = "agriculture_forestry"
TOPIC_BUSINESS = "agriculture_business"
TOPIC_PRECISION = "precision_agriculture"

KNOWN_TOPICS = (
    TOPIC_LIFE_SCIENCES,
    TOPIC_MANAGEMENT,
    TOPIC_FORESTRY,
    TOPIC_BUSINESS,
    TOPIC_PRECISION,
)

SOURCE_KINDS = ("textbook", "article", "web", "question_bank")

DEFAULT_CHUNK_SIZE = 1200
DEFAULT_OVERLAP = 200

# Words per page for the page-count estimate.
WORDS_PER_PAGE = 300


class CorpusError(Exception):
    """Raised for unreadable or malformed corpus input."""


@dataclass(frozen=True)
class Topic:
    """A topic category; the five known labels plus free-form 'other' labels."""

    label: str

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("topic label must be non-empty")

    @property
    def is_known(self) -> bool:
        return self.label in KNOWN_TOPICS

    @classmethod
    def from_name(cls, name: str) -> "Topic":
        """Map a directory or field name onto a topic, case/punctuation-insensitively.

        Unrecognized names become an 'other' topic carrying the raw name.
        """
        normalized = re.sub(r"[^a-z0-9]+", "_", name.strip().lower()).strip("_")
        aliases = {
            "agriculture_and_life_sciences": TOPIC_LIFE_SCIENCES,
            "agriculture_and_forestry": TOPIC_FORESTRY,
            "agriculture_and_business": TOPIC_BUSINESS,
        }
        normalized = aliases.get(normalized, normalized)
        if normalized in KNOWN_TOPICS:
            return cls(normalized)
        if not name.strip():
            raise ValueError("topic name must be non-empty")
        return cls(name.strip())


@dataclass(frozen=True)
class Heading:
    offset: int
    level: int
    text: str


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    topic: Topic
    source_kind: str
    text: str
    headings: tuple[Heading, ...] = ()

    def __post_init__(self) -> None:
        if self.source_kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source_kind {self.source_kind!r}")
        prev = -1
        for h in self.headings:
            if not (prev < h.offset < max(len(self.text), 1)):
                raise ValueError(
                    f"document {self.id!r}: heading offsets must be strictly "
                    f"increasing and within the text"
                )
            if h.level < 1 or h.offset < 0:
                raise ValueError(f"document {self.id!r}: invalid heading {h!r}")
            prev = h.offset


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    ordinal: int
    topic: Topic
    section_path: tuple[str, ...]
    text: str
    span: tuple[int, int]


@dataclass
class CorpusStats:
    doc_count: int
    chunk_count: int
    word_count: int
    page_count_estimate: int
    key_term_frequency: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "chunk_count": self.chunk_count,
            "word_count": self.word_count,
            "page_count_estimate": self.page_count_estimate,
            "key_term_frequency": dict(self.key_term_frequency),
        }


_MD_HEADING = re.compile(r"^(#{1,6})\s+(.*\S)\s*$", re.MULTILINE)


def detect_markdown_headings(text: str) -> tuple[Heading, ...]:
    """Find Markdown '#'-prefixed headings in plain text."""
    return tuple(
        Heading(offset=m.start(), level=len(m.group(1)), text=m.group(2))
        for m in _MD_HEADING.finditer(text)
    )


def _document_from_record(record: dict, where: str) -> Document:
    for key in ("id", "title", "topic", "text"):
        if key not in record:
            raise CorpusError(f"{where}: record missing {key!r} field")
    headings = tuple(
        Heading(offset=h["offset"], level=h["level"], text=h["text"])
        for h in record.get("headings", [])
    )
    if not headings:
        headings = detect_markdown_headings(record["text"])
    return Document(
        id=record["id"],
        title=record["title"],
        topic=Topic.from_name(record["topic"]),
        source_kind=record.get("source_kind", "textbook"),
        text=record["text"],
        headings=headings,
    )


def load_corpus(path: str | Path, fmt: str = "auto") -> list[Document]:
    """Load documents from a JSONL file or a topic-organized text directory.

    Directory layout: <root>/<topic>/<file>.txt|.md; the first-level directory
    names the topic and the relative path becomes the document id.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus path does not exist: {path}")
    if fmt == "auto":
        fmt = "dir" if path.is_dir() else "jsonl"
    if fmt == "jsonl":
        docs = _load_jsonl(path)
    elif fmt == "dir":
        docs = _load_directory(path)
    else:
        raise CorpusError(f"unknown corpus format {fmt!r}")
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            raise CorpusError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
    return docs


def _load_jsonl(path: Path) -> list[Document]:
    if not path.is_file():
        raise CorpusError(f"not a file: {path}")
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{where}: record is not an object")
            docs.append(_document_from_record(record, where))
    return docs


def _load_directory(root: Path) -> list[Document]:
    docs = []
    for file in sorted(root.rglob("*")):
        if not (file.is_file() and file.suffix in (".txt", ".md")):
            continue
        rel = file.relative_to(root)
        topic_name = rel.parts[0] if len(rel.parts) > 1 else "uncategorized"
        try:
            text = file.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise CorpusError(f"cannot read {file}: {exc}") from exc
        docs.append(
            Document(
                id=str(rel),
                title=file.stem.replace("_", " "),
                topic=Topic.from_name(topic_name),
                source_kind="textbook",
                text=text,
                headings=detect_markdown_headings(text),
            )
        )
    return docs


def chunk_document(
    doc: Document,
    target_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Chunk]:
    """Split a document into overlapping character windows.

    Consecutive starts differ by (target_size - overlap); the final chunk
    ends exactly at the end of the text. Each chunk carries the heading
    stack in effect at its start.
    """
    if target_size <= 0:
        raise ValueError("target_size must be positive")
    if overlap < 0 or overlap >= target_size:
        raise ValueError("overlap must satisfy 0 <= overlap < target_size")
    text = doc.text
    if not text:
        return []
    step = target_size - overlap
    chunks = []
    start = 0
    ordinal = 0
    while True:
        end = min(start + target_size, len(text))
        chunks.append(
            Chunk(
                id=f"{doc.id}#{ordinal}",
                doc_id=doc.id,
                ordinal=ordinal,
                topic=doc.topic,
                section_path=_section_path_at(doc, start),
                text=text[start:end],
                span=(start, end),
            )
        )
        if end == len(text):
            break
        start += step
        ordinal += 1
    return chunks


def _section_path_at(doc: Document, offset: int) -> tuple[str, ...]:
    """Heading stack (outermost first) of the nearest headings at or before offset."""
    stack: list[Heading] = []
    for h in doc.headings:
        if h.offset > offset:
            break
        while stack and stack[-1].level >= h.level:
            stack.pop()
        stack.append(h)
    return tuple(h.text for h in stack)


def chunk_corpus(
    docs: list[Document],
    target_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Chunk]:
    chunks: list[Chunk] = []
    for doc in docs:
        chunks.extend(chunk_document(doc, target_size, overlap))
    return chunks


def corpus_stats(
    docs: list[Document],
    chunks: list[Chunk],
    key_terms: list[str] | None = None,
) -> CorpusStats:
    """Word/page counts plus case-insensitive whole-token key-term frequencies."""
    word_count = sum(len(doc.text.split()) for doc in docs)
    freqs: dict[str, int] = {}
    if key_terms:
        tokens: dict[str, int] = {}
        for doc in docs:
            for tok in re.findall(r"[a-z0-9]+", doc.text.lower()):
                tokens[tok] = tokens.get(tok, 0) + 1
        for term in key_terms:
            freqs[term] = tokens.get(term.lower(), 0)
    return CorpusStats(
        doc_count=len(docs),
        chunk_count=len(chunks),
        word_count=word_count,
        page_count_estimate=math.ceil(word_count / WORDS_PER_PAGE),
        key_term_frequency=freqs,
    )
