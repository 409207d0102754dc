from __future__ import annotations

import pytest

from agrirag.llm import (
    Completion,
    LlmClient,
    LlmError,
    LlmProviderConfig,
    first_sentence,
)
from agrirag.rag import ContextBlock, Prompt


def make_prompt(query="What is tillage?", blocks=()) -> Prompt:
    return Prompt(system_text="sys", context_blocks=tuple(blocks), query=query)


def block(text: str, score: float = 0.9, chunk_id: str = "c1") -> ContextBlock:
    return ContextBlock(chunk_id=chunk_id, doc_title="Doc", section_path=("Ch 1",),
                        score=score, text=text)


class TestFirstSentence:
    @pytest.mark.parametrize("text,expected", [
        ("Crop rotation improves soil. It also reduces pests.",
         "Crop rotation improves soil."),
        ("Does it work? Yes.", "Does it work?"),
        ("No terminator here", "No terminator here"),
        ("Great! More text.", "Great!"),
    ])
    def test_split(self, text, expected):
        assert first_sentence(text) == expected


class TestMocks:
    def test_echo(self):
        client = LlmClient(LlmProviderConfig(provider_id="e", endpoint="mock-echo"))
        out = client.complete(make_prompt())
        assert out.text == "ECHO: What is tillage?"
        assert out.provider_id == "e"

    def test_extractive_no_context(self):
        client = LlmClient(LlmProviderConfig(provider_id="x",
                                             endpoint="mock-extractive"))
        assert client.complete(make_prompt()).text == "NO CONTEXT"

    def test_extractive_first_sentence_of_top_block(self):
        client = LlmClient(LlmProviderConfig(provider_id="x",
                                             endpoint="mock-extractive"))
        prompt = make_prompt(blocks=[
            block("Crop rotation improves soil. It also reduces pests.", 0.9),
            block("Second block. Unused.", 0.5, "c2"),
        ])
        assert client.complete(prompt).text == "Crop rotation improves soil."

    def test_mocks_pure(self):
        client = LlmClient(LlmProviderConfig(provider_id="x", endpoint="mock-echo"))
        p = make_prompt("same question?")
        assert client.complete(p).text == client.complete(p).text

    def test_mock_latency_sane(self):
        client = LlmClient(LlmProviderConfig(provider_id="x", endpoint="mock-echo"))
        out = client.complete(make_prompt())
        assert 0 <= out.latency_ms < 50

    def test_empty_query_rejected(self):
        client = LlmClient(LlmProviderConfig(provider_id="x", endpoint="mock-echo"))
        with pytest.raises(LlmError):
            client.complete(make_prompt(query=""))

    def test_token_estimate(self):
        client = LlmClient(LlmProviderConfig(provider_id="x", endpoint="mock-echo"))
        out = client.complete(make_prompt("abcd"))
        assert out.token_estimate == (len(out.text) + 3) // 4


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            LlmProviderConfig(provider_id="p", timeout_ms=0)
        with pytest.raises(ValueError):
            LlmProviderConfig(provider_id="p", max_output_tokens=0)


class TestRemote:
    def test_chat_completions_shape(self, monkeypatch):
        import httpx

        captured = {}
        def fake_post(url, json=None, headers=None, timeout=None):
            captured["payload"] = json
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "remote answer"}}]})

        monkeypatch.setattr(httpx, "post", fake_post)
        client = LlmClient(LlmProviderConfig(
            provider_id="r", endpoint="http://example/chat", model_name="m1"))
        out = client.complete(make_prompt("hello?", [block("Ctx text.")]))
        assert out.text == "remote answer"
        assert captured["payload"]["model"] == "m1"
        roles = [m["role"] for m in captured["payload"]["messages"]]
        assert roles == ["system", "user"]
        assert "Ctx text." in captured["payload"]["messages"][1]["content"]

    def test_empty_remote_response_is_error(self, monkeypatch):
        import httpx

        monkeypatch.setattr(httpx, "post", lambda *a, **k: httpx.Response(
            200, json={"choices": [{"message": {"content": ""}}]}))
        client = LlmClient(LlmProviderConfig(
            provider_id="r", endpoint="http://example/chat"))
        with pytest.raises(LlmError, match="empty"):
            client.complete(make_prompt())

    def test_retry_on_5xx(self, monkeypatch):
        import httpx

        calls = {"n": 0}
        def fake_post(*a, **k):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(503, json={})
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "late"}}]})

        monkeypatch.setattr(httpx, "post", fake_post)
        monkeypatch.setattr("agrirag.llm.time.sleep", lambda s: None)
        client = LlmClient(LlmProviderConfig(
            provider_id="r", endpoint="http://example/chat"))
        assert client.complete(make_prompt()).text == "late"
        assert calls["n"] == 3
