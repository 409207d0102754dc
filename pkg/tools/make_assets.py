#!/usr/bin/env python3
"""Regenerate the bundled synthetic corpus and question bank.

Deterministic (fixed seed). Each topic gets one markdown document long
enough to yield 20+ chunks at default chunking parameters; the question
bank takes 20 questions per topic, each quoting a chunk-unique text span
so the target chunk is retrievable, with the chunk's first sentence as
the reference answer. The script verifies retrieval rank-1 and extractive
accuracy before writing anything.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from agrirag.corpus import chunk_corpus, load_corpus
from agrirag.embedding import EmbeddingClient, EmbeddingProviderConfig
from agrirag.llm import LlmClient, LlmProviderConfig, first_sentence
from agrirag.rag import ChunkCatalog, RagParams, RagPipeline
from agrirag.vectorstore import build_flat, entries_from

SEED = 20240601
QUESTIONS_PER_TOPIC = 20
CHUNKS_NEEDED = QUESTIONS_PER_TOPIC + 2
EMBED_DIM = 256

ASSETS = Path(__file__).resolve().parents[1] / "src" / "agrirag" / "assets"

TOPIC_VOCAB = {
    "agriculture_life_sciences": {
        "title": "Foundations of Agricultural Life Sciences",
        "nouns": ["germplasm", "photosynthesis", "chlorophyll", "genome", "enzyme",
                  "phenotype", "cultivar", "seedling", "pollinator", "microbiome",
                  "nitrogen cycle", "cell wall", "chloroplast", "allele", "stomata"],
        "verbs": ["regulates", "accelerates", "inhibits", "sustains", "modulates",
                  "transforms", "stabilizes"],
        "adjectives": ["cellular", "genetic", "physiological", "biochemical",
                       "molecular", "vegetative", "reproductive"],
        "contexts": ["greenhouse trials", "field laboratories", "breeding programs",
                     "tissue cultures", "germination studies"],
    },
    "agricultural_management": {
        "title": "Principles of Agricultural Management",
        "nouns": ["ledger", "payroll", "workforce", "inventory", "lease",
                  "appraisal", "amortization", "budget", "cash flow", "collateral",
                  "depreciation", "equity", "insurance", "liability", "margin"],
        "verbs": ["allocates", "forecasts", "audits", "negotiates", "consolidates",
                  "hedges", "schedules"],
        "adjectives": ["fiscal", "operational", "managerial", "contractual",
                       "strategic", "quarterly", "seasonal"],
        "contexts": ["cooperative boards", "lending reviews", "estate transfers",
                     "labor negotiations", "enterprise budgets"],
    },
    "agriculture_forestry": {
        "title": "Crop, Soil, and Rangeland Science",
        "nouns": ["loam", "silviculture", "canopy", "understory", "watershed",
                  "windbreak", "mulch", "tillage", "terracing", "rangeland",
                  "rotation", "pasture", "hardwood", "conifer", "erosion"],
        "verbs": ["conserves", "restores", "shelters", "drains", "enriches",
                  "anchors", "renews"],
        "adjectives": ["arable", "perennial", "deciduous", "riparian", "grazing",
                       "windward", "fallow"],
        "contexts": ["timber stands", "grazing allotments", "contour plots",
                     "shelterbelt surveys", "soil horizons"],
    },
    "agriculture_business": {
        "title": "Agribusiness and Animal Enterprise",
        "nouns": ["creamery", "herd", "dairy", "livestock", "auction", "broker",
                  "commodity", "cooperative", "feedlot", "grain elevator",
                  "processor", "shipment", "tariff", "wholesale", "brand"],
        "verbs": ["markets", "distributes", "certifies", "exports", "grades",
                  "packages", "contracts"],
        "adjectives": ["organic", "certified", "wholesale", "regional",
                       "value-added", "pasteurized", "traceable"],
        "contexts": ["commodity exchanges", "processing plants", "farmers markets",
                     "export terminals", "breed registries"],
    },
    "precision_agriculture": {
        "title": "Precision Agriculture Systems",
        "nouns": ["telemetry", "drone", "sensor", "waypoint", "yield map",
                  "spectrometer", "autosteer", "firmware", "geofence", "lidar",
                  "actuator", "datalogger", "nozzle", "satellite", "algorithm"],
        "verbs": ["calibrates", "georeferences", "samples", "automates",
                  "interpolates", "streams", "triangulates"],
        "adjectives": ["variable-rate", "spatial", "autonomous", "multispectral",
                       "real-time", "digital", "networked"],
        "contexts": ["guidance passes", "prescription maps", "telemetry dashboards",
                     "calibration runs", "soil grids"],
    },
}


def make_sentence(rng: random.Random, vocab: dict) -> str:
    noun = rng.choice(vocab["nouns"])
    verb = rng.choice(vocab["verbs"])
    adj = rng.choice(vocab["adjectives"])
    other = rng.choice(vocab["nouns"])
    context = rng.choice(vocab["contexts"])
    patterns = [
        f"The {adj} {noun} {verb} the {other} observed across {context}.",
        f"In {context}, the {noun} {verb} every {adj} {other}.",
        f"Records from {context} show that {adj} {noun} {verb} the {other}.",
        f"A {adj} approach to {noun} {verb} both {other} and {context}.",
        f"Careful study of the {noun} {verb} how {context} handle {adj} {other}.",
    ]
    return rng.choice(patterns)


def make_document(rng: random.Random, topic: str, vocab: dict, min_chars: int) -> str:
    lines = [f"# {vocab['title']}", ""]
    section = 0
    chars = 0
    while chars < min_chars:
        section += 1
        heading = f"## Unit {section}: {rng.choice(vocab['nouns']).title()} Practices"
        lines.extend([heading, ""])
        for _ in range(3):
            sentences = [make_sentence(rng, vocab) for _ in range(rng.randint(5, 8))]
            para = " ".join(sentences)
            lines.extend([para, ""])
            chars += len(para)
    return "\n".join(lines)


def main() -> None:
    rng = random.Random(SEED)
    corpus_dir = ASSETS / "corpus"
    if corpus_dir.exists():
        for f in sorted(corpus_dir.rglob("*")):
            if f.is_file():
                f.unlink()
    min_chars = CHUNKS_NEEDED * 1000 + 1200
    for topic, vocab in TOPIC_VOCAB.items():
        doc_dir = corpus_dir / topic
        doc_dir.mkdir(parents=True, exist_ok=True)
        text = make_document(rng, topic, vocab, min_chars)
        (doc_dir / "handbook.md").write_text(text, encoding="utf-8")

    docs = load_corpus(corpus_dir)
    chunks = chunk_corpus(docs)
    embedder = EmbeddingClient(EmbeddingProviderConfig(provider_id="local", dim=EMBED_DIM))
    vectors = embedder.embed_batch([c.text for c in chunks])
    index = build_flat(entries_from([c.id for c in chunks], vectors))
    catalog = ChunkCatalog.from_documents(docs, chunks)
    pipeline = RagPipeline(
        index=index,
        catalog=catalog,
        embedder=embedder,
        llm=LlmClient(LlmProviderConfig(provider_id="extractive",
                                        endpoint="mock-extractive")),
        params=RagParams(),
    )

    by_topic: dict[str, list] = {}
    for chunk in chunks:
        by_topic.setdefault(chunk.topic.label, []).append(chunk)

    questions = []
    for topic, topic_chunks in by_topic.items():
        picked = 0
        for chunk in topic_chunks:
            if picked >= QUESTIONS_PER_TOPIC:
                break
            # quote only the chunk-unique middle, clear of overlap regions
            rel = chunk.text[250:700].strip()
            if len(rel) < 100:
                continue
            query = f"According to the handbook, {rel}"
            answer = pipeline.answer_query(query)
            reference = first_sentence(chunk.text)
            if answer.used_fallback or answer.citations[0].chunk_id != chunk.id:
                continue
            if answer.text != reference:
                continue
            picked += 1
            questions.append({
                "id": f"q-{topic}-{picked:02d}",
                "topic": topic,
                "question": query,
                "relevant_chunk_ids": [chunk.id],
                "reference_answers": [reference],
            })
        if picked < QUESTIONS_PER_TOPIC:
            raise SystemExit(f"topic {topic}: only {picked} usable questions")

    bank_path = ASSETS / "questions.jsonl"
    with open(bank_path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q) + "\n")
    print(f"wrote {len(docs)} docs, {len(chunks)} chunks, {len(questions)} questions")


if __name__ == "__main__":
    main()
