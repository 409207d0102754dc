from __future__ import annotations

import pytest

from agrirag.llm import first_sentence
from agrirag.rag import (
    ChunkCatalog,
    RagError,
    RagParams,
    SYSTEM_TEXT_FALLBACK,
    SYSTEM_TEXT_WITH_CONTEXT,
    answer_query,
    build_prompt,
    retrieve,
)
from agrirag.vectorstore import SearchHit

from .conftest import make_llm
from .oracles import brute_force_search


class TestRetrieve:
    def test_unsatisfiable_threshold_empty(self, mini_index, local_embedder):
        params = RagParams(relevance_threshold=1.1)
        assert retrieve("any query at all", params, mini_index, local_embedder) == []

    def test_identical_text_is_top_hit(self, mini_index, mini_chunks, local_embedder):
        target = mini_chunks[5]
        hits = retrieve(target.text, RagParams(), mini_index, local_embedder)
        assert hits[0].chunk_id == target.id
        assert hits[0].score == pytest.approx(1.0, abs=1e-6)

    def test_ranks_match_brute_force(self, mini_index, mini_chunks, local_embedder):
        query = mini_chunks[10].text[300:600]
        ids = mini_index.ids
        vectors = [mini_index.matrix[i].tolist() for i in range(len(ids))]
        qvec = local_embedder.embed_one(query)
        expected = brute_force_search(ids, vectors, qvec.values.tolist(), 5)
        hits = retrieve(query, RagParams(relevance_threshold=-1.0),
                        mini_index, local_embedder)
        assert [h.chunk_id for h in hits] == [cid for cid, _ in expected]
        assert expected[0][0] == mini_chunks[10].id

    def test_provider_mismatch_rejected(self, mini_index):
        from agrirag.embedding import EmbeddingClient, EmbeddingProviderConfig

        other = EmbeddingClient(EmbeddingProviderConfig(provider_id="other", dim=256))
        with pytest.raises(RagError, match="provider") as exc_info:
            retrieve("query", RagParams(), mini_index, other)
        assert exc_info.value.stage == "embed"

    def test_empty_query_rejected(self, mini_index, local_embedder):
        with pytest.raises(RagError):
            retrieve("", RagParams(), mini_index, local_embedder)

    def test_threshold_monotonicity(self, mini_index, mini_chunks, local_embedder):
        query = mini_chunks[3].text[250:700]
        previous = None
        for threshold in (-1.0, 0.0, 0.25, 0.5, 0.9, 1.01):
            hits = retrieve(query, RagParams(relevance_threshold=threshold),
                            mini_index, local_embedder)
            ids = {h.chunk_id for h in hits}
            if previous is not None:
                assert ids <= previous
            previous = ids


class TestBuildPrompt:
    def test_zero_hits_fallback_variant(self, mini_catalog):
        prompt = build_prompt("q?", [], mini_catalog, RagParams())
        assert prompt.context_blocks == ()
        assert prompt.system_text == SYSTEM_TEXT_FALLBACK

    def test_blocks_in_score_order(self, mini_catalog, mini_chunks):
        hits = [
            SearchHit(mini_chunks[0].id, 0.9),
            SearchHit(mini_chunks[1].id, 0.7),
            SearchHit(mini_chunks[2].id, 0.5),
        ]
        prompt = build_prompt("q?", hits, mini_catalog, RagParams())
        assert [b.chunk_id for b in prompt.context_blocks] == [h.chunk_id for h in hits]
        assert prompt.system_text == SYSTEM_TEXT_WITH_CONTEXT
        # context fidelity: block text is byte-equal to the stored chunk
        for b in prompt.context_blocks:
            assert b.text == mini_catalog.get(b.chunk_id).text

    def test_greedy_whole_block_packing(self):
        from agrirag.corpus import Chunk, Topic

        chunks = [
            Chunk(id=f"k{i}", doc_id="d", ordinal=i, topic=Topic("t"),
                  section_path=(), text="x" * 4000, span=(0, 4000))
            for i in range(2)
        ]
        catalog = ChunkCatalog(chunks, {"d": "Doc"})
        hits = [SearchHit("k0", 0.9), SearchHit("k1", 0.8)]
        prompt = build_prompt("q?", hits, catalog,
                              RagParams(max_context_chars=6000))
        assert [b.chunk_id for b in prompt.context_blocks] == ["k0"]

    def test_unknown_chunk_id(self, mini_catalog):
        with pytest.raises(RagError, match="unknown chunk id"):
            build_prompt("q?", [SearchHit("missing", 0.9)], mini_catalog, RagParams())

    def test_render_carries_titles_and_sections(self, mini_catalog, mini_chunks):
        prompt = build_prompt("q?", [SearchHit(mini_chunks[4].id, 0.8)],
                              mini_catalog, RagParams())
        rendered = prompt.render_user_message()
        assert "[Source: " in rendered
        assert rendered.endswith("Question: q?")


class TestAnswerQuery:
    def test_extractive_composition(self, extractive_pipeline, mini_chunks):
        target = mini_chunks[8]
        query = target.text[250:700]
        answer = extractive_pipeline.answer_query(query)
        assert answer.used_fallback is False
        assert answer.citations[0].chunk_id == target.id
        assert answer.text == first_sentence(target.text)

    def test_forced_fallback_echo(self, echo_pipeline):
        answer = echo_pipeline.answer_query(
            "tell me about soil?",
            params=RagParams(relevance_threshold=1.1),
        )
        assert answer.used_fallback is True
        assert answer.citations == ()
        assert answer.text == "ECHO: tell me about soil?"

    def test_empty_query_error(self, extractive_pipeline):
        with pytest.raises(RagError):
            extractive_pipeline.answer_query("")

    def test_oversized_query_error(self, extractive_pipeline):
        with pytest.raises(RagError, match="8192"):
            extractive_pipeline.answer_query("x" * 9000)

    def test_fallback_exclusivity(self, extractive_pipeline, mini_chunks):
        for query in [mini_chunks[2].text[:300], "zzz qqq jjj jjj"]:
            answer = extractive_pipeline.answer_query(query)
            assert answer.used_fallback == (len(answer.citations) == 0)

    def test_end_to_end_determinism(self, extractive_pipeline, mini_chunks):
        query = mini_chunks[12].text[250:700]
        a1 = extractive_pipeline.answer_query(query)
        a2 = extractive_pipeline.answer_query(query)
        assert a1.text == a2.text
        assert a1.citations == a2.citations
        assert a1.used_fallback == a2.used_fallback

    def test_latency_recorded(self, extractive_pipeline, mini_chunks):
        answer = extractive_pipeline.answer_query(mini_chunks[0].text[:200])
        assert answer.latency_ms >= 0
        assert answer.retrieved_k == len(answer.citations)


class TestCatalogPersistence:
    def test_round_trip(self, mini_catalog, mini_docs, tmp_path):
        path = tmp_path / "catalog.jsonl"
        mini_catalog.save(path)
        loaded = ChunkCatalog.load(path)
        assert len(loaded) == len(mini_catalog)
        some_id = mini_catalog.chunk_ids()[0]
        assert loaded.get(some_id).text == mini_catalog.get(some_id).text
        assert loaded.doc_title(mini_docs[0].id) == mini_docs[0].title
