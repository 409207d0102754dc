"""Evaluation harness: question bank, retrieval-quality metrics (MRR,
Recall@k), BLEU answer similarity, an automatic accuracy criterion, and
report rendering as JSON plus aligned text tables."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Topic
from .rag import Answer, RagParams, RagPipeline, retrieve

DEFAULT_RECALL_K = 10
DEFAULT_BLEU_THRESHOLD = 0.5

BLEU_MAX_ORDER = 4


class EvalError(Exception):
    """Bad question bank or unusable benchmark input."""


@dataclass(frozen=True)
class EvalQuestion:
    id: str
    topic: Topic
    question: str
    relevant_chunk_ids: frozenset[str]
    reference_answers: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.reference_answers:
            raise ValueError(f"question {self.id!r} has no reference answers")


def load_question_bank(path: str | Path) -> list[EvalQuestion]:
    """Read a JSONL question bank; one object per line."""
    path = Path(path)
    if not path.is_file():
        raise EvalError(f"question bank not found: {path}")
    questions = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                questions.append(EvalQuestion(
                    id=rec["id"],
                    topic=Topic.from_name(rec["topic"]),
                    question=rec["question"],
                    relevant_chunk_ids=frozenset(rec.get("relevant_chunk_ids", [])),
                    reference_answers=tuple(rec["reference_answers"]),
                ))
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise EvalError(f"{path}:{lineno}: bad question record ({exc})") from exc
    return questions


# ---------------------------------------------------------------------------
# Retrieval metrics


def mrr(results: list[dict]) -> float:
    """Mean reciprocal rank of the first relevant id; misses contribute 0.

    Each result is {"ranked_ids": [...], "relevant": set(...)}.
    """
    if not results:
        raise EvalError("mrr: empty results list")
    total = 0.0
    for res in results:
        ranked, relevant = res["ranked_ids"], res["relevant"]
        for rank, cid in enumerate(ranked, start=1):
            if cid in relevant:
                total += 1.0 / rank
                break
    return total / len(results)


def recall_at_k(results: list[dict], k: int) -> float:
    """Mean fraction of a query's relevant ids found in its top-k; queries
    with no relevant ids are excluded from the mean."""
    if k < 1:
        raise EvalError("recall_at_k: k must be >= 1")
    scores = []
    for res in results:
        relevant = res["relevant"]
        if not relevant:
            continue
        top = set(res["ranked_ids"][:k])
        scores.append(len(top & relevant) / len(relevant))
    if not scores:
        raise EvalError("recall_at_k: every query has an empty relevant set")
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# BLEU

_TOKEN = re.compile(r"\w+|[^\w\s]")


def bleu_tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and punctuation boundaries."""
    return _TOKEN.findall(text.lower())


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, references: list[str]) -> float:
    """Sentence BLEU-4: geometric mean of modified n-gram precisions
    (add-one smoothing for n >= 2) times the brevity penalty against the
    closest-length reference."""
    cand = bleu_tokenize(candidate)
    refs = [bleu_tokenize(r) for r in references]
    if not cand or not refs:
        return 0.0

    log_sum = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        counts = _ngram_counts(cand, n)
        total = sum(counts.values())
        max_counts: Counter = Counter()
        for ref in refs:
            ref_counts = _ngram_counts(ref, n)
            for gram in counts:
                max_counts[gram] = max(max_counts[gram], ref_counts[gram])
        clipped = sum(min(c, max_counts[g]) for g, c in counts.items())
        if n == 1:
            if clipped == 0:
                return 0.0
            precision = clipped / total
        else:
            precision = (clipped + 1) / (total + 1)
        log_sum += math.log(precision) / BLEU_MAX_ORDER

    c = len(cand)
    r = min((len(ref) for ref in refs), key=lambda rl: (abs(rl - c), rl))
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * math.exp(log_sum)


# ---------------------------------------------------------------------------
# Accuracy criterion


@dataclass(frozen=True)
class Criterion:
    """How an answer counts as correct: 'bleu_threshold', 'exact_match',
    or 'citation_hit'."""

    kind: str
    threshold: float = DEFAULT_BLEU_THRESHOLD

    def __post_init__(self) -> None:
        if self.kind not in ("bleu_threshold", "exact_match", "citation_hit"):
            raise ValueError(f"unknown criterion {self.kind!r}")

    @classmethod
    def parse(cls, spec: str) -> "Criterion":
        """Parse 'exact_match', 'citation_hit', or 'bleu_threshold:0.5'."""
        if ":" in spec:
            kind, _, value = spec.partition(":")
            return cls(kind=kind, threshold=float(value))
        return cls(kind=spec)


def _normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


def judge_accuracy(answer: Answer, question: EvalQuestion, criterion: Criterion) -> bool:
    if criterion.kind == "exact_match":
        normalized = _normalize_text(answer.text)
        return any(normalized == _normalize_text(r) for r in question.reference_answers)
    if criterion.kind == "citation_hit":
        cited = {c.chunk_id for c in answer.citations}
        return bool(cited & question.relevant_chunk_ids)
    return bleu(answer.text, list(question.reference_answers)) >= criterion.threshold


# ---------------------------------------------------------------------------
# Benchmark


@dataclass
class ConfigRow:
    config_label: str
    mrr: float
    recall: float
    recall_k: int
    bleu: float


@dataclass
class TopicRow:
    topic: str
    accuracy_pct: float
    avg_time_s: float
    question_count: int


@dataclass
class MetricsReport:
    config_rows: list[ConfigRow] = field(default_factory=list)
    topic_rows: list[TopicRow] = field(default_factory=list)
    overall_accuracy_pct: float = 0.0
    overall_avg_time_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "configurations": [
                {
                    "config_label": r.config_label,
                    "mrr": r.mrr,
                    "recall_at_k": r.recall,
                    "recall_k": r.recall_k,
                    "bleu": r.bleu,
                }
                for r in self.config_rows
            ],
            "topics": [
                {
                    "topic": r.topic,
                    "accuracy_pct": r.accuracy_pct,
                    "avg_time_s": r.avg_time_s,
                    "question_count": r.question_count,
                }
                for r in self.topic_rows
            ],
            "overall": {
                "accuracy_pct": self.overall_accuracy_pct,
                "avg_time_s": self.overall_avg_time_s,
            },
        }


def _fmt(value: float) -> str:
    return f"{value:g}"


def render_quality_table(rows: list[ConfigRow]) -> str:
    """'Model | MRR | Recall@k | BLEU' table; recall and BLEU as percentages."""
    k = rows[0].recall_k if rows else DEFAULT_RECALL_K
    header = ["Model", "MRR (0-1)", f"Recall@{k} (%)", "BLEU (%)"]
    body = [
        [r.config_label, f"{r.mrr:.2f}", _fmt(r.recall * 100), _fmt(r.bleu * 100)]
        for r in rows
    ]
    return _render_table(header, body)


def render_performance_table(report: MetricsReport) -> str:
    """Per-topic 'Acc. (%) | Avg. Time (s)' table with an average row."""
    header = ["Topic", "Acc. (%)", "Avg. Time (s)"]
    body = [
        [r.topic, _fmt(round(r.accuracy_pct, 1)), _fmt(round(r.avg_time_s, 2))]
        for r in report.topic_rows
    ]
    body.append([
        "Average",
        _fmt(round(report.overall_accuracy_pct, 1)),
        _fmt(round(report.overall_avg_time_s, 2)),
    ])
    return _render_table(header, body)


def _render_table(header: list[str], body: list[list[str]]) -> str:
    rows = [header] + body
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def run_benchmark(
    bank: list[EvalQuestion],
    pipeline: RagPipeline,
    criterion: Criterion | None = None,
    repeats: int = 1,
    recall_k: int = DEFAULT_RECALL_K,
    config_label: str | None = None,
) -> MetricsReport:
    """Run every question through the pipeline `repeats` times and report
    per-topic accuracy/latency plus MRR, Recall@k, and mean BLEU."""
    if not bank:
        raise EvalError("question bank is empty")
    if repeats < 1:
        raise EvalError("repeats must be >= 1")
    criterion = criterion or Criterion("bleu_threshold")
    catalog_ids = set(pipeline.catalog.chunk_ids())
    for q in bank:
        unknown = q.relevant_chunk_ids - catalog_ids
        if unknown:
            raise EvalError(
                f"question {q.id!r} references unknown chunk ids: {sorted(unknown)[:3]}"
            )

    retrieval_results = []
    per_topic: dict[str, dict] = {}
    bleu_scores = []
    for question in bank:
        bucket = per_topic.setdefault(
            question.topic.label,
            {"correct": 0, "count": 0, "time_ms": 0, "answers": 0},
        )
        for _ in range(repeats):
            answer = pipeline.answer_query(question.question)
            bucket["time_ms"] += answer.latency_ms
            bucket["answers"] += 1
        # metrics besides latency are repeat-invariant for a fixed pipeline
        bucket["count"] += 1
        if judge_accuracy(answer, question, criterion):
            bucket["correct"] += 1
        bleu_scores.append(
            bleu(answer.text, list(question.reference_answers))
        )
        ranked = _ranked_ids(question.question, pipeline, recall_k)
        retrieval_results.append(
            {"ranked_ids": ranked, "relevant": set(question.relevant_chunk_ids)}
        )

    label = config_label or (
        f"{pipeline.llm.provider_id} ({type(pipeline.index).__name__})"
    )
    has_relevant = any(r["relevant"] for r in retrieval_results)
    config_row = ConfigRow(
        config_label=label,
        mrr=mrr(retrieval_results),
        recall=recall_at_k(retrieval_results, recall_k) if has_relevant else 0.0,
        recall_k=recall_k,
        bleu=sum(bleu_scores) / len(bleu_scores),
    )

    topic_rows = [
        TopicRow(
            topic=topic,
            accuracy_pct=100.0 * b["correct"] / b["count"],
            avg_time_s=(b["time_ms"] / b["answers"]) / 1000.0,
            question_count=b["count"],
        )
        for topic, b in per_topic.items()
    ]
    return MetricsReport(
        config_rows=[config_row],
        topic_rows=topic_rows,
        overall_accuracy_pct=sum(r.accuracy_pct for r in topic_rows) / len(topic_rows),
        overall_avg_time_s=sum(r.avg_time_s for r in topic_rows) / len(topic_rows),
    )


def _ranked_ids(query: str, pipeline: RagPipeline, k: int) -> list[str]:
    """Threshold-free ranking used for MRR/Recall; k may exceed top_k."""
    params = RagParams(
        top_k=max(k, pipeline.params.top_k),
        relevance_threshold=-1.0,
        max_context_chars=pipeline.params.max_context_chars,
    )
    hits = retrieve(query, params, pipeline.index, pipeline.embedder)
    return [h.chunk_id for h in hits]


def report_from_fixture(rows: list[dict]) -> list[ConfigRow]:
    """Build quality-table rows from externally supplied numbers, for
    rendering reference layouts."""
    return [
        ConfigRow(
            config_label=r["config_label"],
            mrr=r["mrr"],
            recall=r["recall"],
            recall_k=r.get("recall_k", DEFAULT_RECALL_K),
            bleu=r["bleu"],
        )
        for r in rows
    ]
