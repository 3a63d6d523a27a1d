import json

import pytest
import requests

from clair_eval.core import Caption
from clair_eval.prompting import build_prompt
from clair_eval.providers import (
    AuthenticationError,
    CachingProvider,
    CompletionRequest,
    CompletionResponse,
    HttpProvider,
    MockOverlapProvider,
    ProviderConfig,
    ReplayMissError,
    ReplayProvider,
    ResponseCache,
    TransportExhaustedError,
    cache_key,
    cost_report,
    mock_overlap_response,
    MSCOCO_REFERENCE_MEAN_TOKENS,
    overlap_score,
)


def prompt_for(cands, refs):
    return build_prompt([Caption(c) for c in cands], [Caption(r) for r in refs])


class TestMockOverlap:
    def test_derived_hand_case(self):
        # Unigram sets of size 6 and 5, intersection {a, dog, grass} = 3,
        # union = 8 -> round(100 * 3/8) = 38.
        score = overlap_score(["a dog runs in the grass"], ["a dog running through grass"])
        assert score == 38

    def test_identity(self):
        assert overlap_score(["a red bird"], ["a red bird"]) == 100

    def test_disjoint(self):
        assert overlap_score(["red car"], ["blue sky"]) == 0

    def test_symmetric(self):
        cands = ["a dog runs in the grass", "cat"]
        refs = ["a dog running through grass"]
        assert overlap_score(cands, refs) == overlap_score(refs, cands)

    def test_response_shape(self):
        response = mock_overlap_response(["a dog"], ["a dog"])
        payload = json.loads(response.text)
        assert payload == {"score": 100, "reason": "token overlap 100%"}
        assert response.output_tokens == len(response.text.split())

    def test_provider_deterministic(self):
        provider = MockOverlapProvider()
        request = CompletionRequest(prompt=prompt_for(["a dog"], ["the dog", "a hound"]))
        assert provider.complete(request) == provider.complete(request)
        assert provider.complete(request).input_tokens > 0


class TestCacheKey:
    def test_equal_inputs_equal_key(self):
        prompt = prompt_for(["a"], ["b"])
        assert cache_key("p", "m", prompt, 0.0, 0) == cache_key("p", "m", prompt, 0.0, 0)

    def test_any_field_changes_key(self):
        prompt = prompt_for(["a"], ["b"])
        other_prompt = prompt_for(["a"], ["c"])
        base = cache_key("p", "m", prompt, 0.0, 0)
        assert cache_key("q", "m", prompt, 0.0, 0) != base
        assert cache_key("p", "n", prompt, 0.0, 0) != base
        assert cache_key("p", "m", other_prompt, 0.0, 0) != base
        assert cache_key("p", "m", prompt, 1.0, 0) != base
        assert cache_key("p", "m", prompt, 0.0, 1) != base


def make_response(text="hi", provider_id="p"):
    return CompletionResponse(
        text=text, input_tokens=3, output_tokens=2,
        provider_id=provider_id, model_name="m",
    )


class TestResponseCache:
    def test_round_trip(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")
        cache.put("k1", make_response())
        assert cache.get("k1") == make_response()
        reloaded = ResponseCache(tmp_path / "cache.jsonl")
        assert reloaded.get("k1") == make_response()

    def test_miss(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")
        assert cache.get("nope") is None

    def test_write_once(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")
        cache.put("k", make_response("first"))
        cache.put("k", make_response("second"))
        assert cache.get("k").text == "first"
        assert ResponseCache(tmp_path / "cache.jsonl").get("k").text == "first"

    def test_verify_clean_and_corrupted(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        cache.put("k1", make_response("a"))
        cache.put("k2", make_response("b"))
        assert cache.verify() == []
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace('"text": "b"', '"text": "B"')
        path.write_text("\n".join(lines) + "\n")
        problems = ResponseCache(path).verify()
        assert len(problems) == 1
        assert "line 2" in problems[0]

    def test_compact_drops_duplicates(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        cache.put("k", make_response("keep"))
        line = path.read_text()
        path.write_text(line + line)
        reloaded = ResponseCache(path)
        assert reloaded.compact() == 1
        assert ResponseCache(path).get("k").text == "keep"


class TestCachingProvider:
    def test_read_through_and_short_circuit(self, tmp_path):
        cache = ResponseCache(tmp_path / "cache.jsonl")
        inner = MockOverlapProvider()
        calls = []
        original = inner.complete
        inner.complete = lambda request: (calls.append(1), original(request))[1]
        provider = CachingProvider(inner, cache)
        request = CompletionRequest(prompt=prompt_for(["a dog"], ["the dog"]))
        first = provider.complete(request)
        second = provider.complete(request)
        assert first == second
        assert len(calls) == 1


class TestReplayProvider:
    def test_replay_hit_and_miss(self, tmp_path):
        cache = ResponseCache(tmp_path / "fixture.jsonl")
        config = ProviderConfig(provider_id="fix", model_name="m")
        prompt = prompt_for(["a dog"], ["the dog"])
        key = cache_key("fix", "m", prompt, 0.0, 0)
        cache.put(key, make_response("recorded", provider_id="fix"))
        provider = ReplayProvider(config, cache)
        hit = provider.complete(CompletionRequest(prompt=prompt))
        assert hit.text == "recorded"
        with pytest.raises(ReplayMissError):
            provider.complete(CompletionRequest(prompt=prompt, temperature=1.0))


class FakeSession:
    """Canned HTTP responses; records how often it was called."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = 0

    def post(self, url, **kwargs):
        self.calls += 1
        outcome = self.outcomes.pop(0) if self.outcomes else self.outcomes_exhausted()
        if isinstance(outcome, Exception):
            raise outcome
        return outcome

    @staticmethod
    def outcomes_exhausted():
        raise AssertionError("FakeSession ran out of outcomes")


class FakeHttpResponse:
    def __init__(self, status_code, payload=None):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        return self._payload


def http_provider(outcomes, **config_overrides):
    config = ProviderConfig(
        provider_id="api", model_name="m", endpoint="http://localhost/v1/chat",
        **config_overrides,
    )
    session = FakeSession(outcomes)
    provider = HttpProvider(config, api_key="test-key", session=session, sleep=lambda s: None)
    return provider, session


def ok_payload(text='{"score": 50, "reason": "ok"}'):
    return {
        "choices": [{"message": {"content": text}}],
        "usage": {"prompt_tokens": 90, "completion_tokens": 10},
    }


class TestHttpProvider:
    def request(self):
        return CompletionRequest(prompt=prompt_for(["a dog"], ["the dog"]))

    def test_success(self):
        provider, session = http_provider([FakeHttpResponse(200, ok_payload())])
        response = provider.complete(self.request())
        assert response.input_tokens == 90
        assert response.output_tokens == 10
        assert session.calls == 1

    def test_retries_then_succeeds(self):
        provider, session = http_provider(
            [
                FakeHttpResponse(429),
                requests.ConnectionError("boom"),
                FakeHttpResponse(200, ok_payload()),
            ]
        )
        response = provider.complete(self.request())
        assert response.output_tokens == 10
        assert session.calls == 3

    def test_transport_exhausted_on_repeated_429(self):
        provider, session = http_provider([FakeHttpResponse(429)] * 5)
        with pytest.raises(TransportExhaustedError):
            provider.complete(self.request())
        assert session.calls == 5

    def test_auth_error_not_retried(self):
        provider, session = http_provider([FakeHttpResponse(401)])
        with pytest.raises(AuthenticationError):
            provider.complete(self.request())
        assert session.calls == 1

    def test_missing_api_key_names_env_var(self, monkeypatch):
        monkeypatch.delenv("CLAIR_API_KEY_API", raising=False)
        config = ProviderConfig(provider_id="api", model_name="m", endpoint="http://x")
        with pytest.raises(AuthenticationError, match="CLAIR_API_KEY_API"):
            HttpProvider(config)


class TestCostReport:
    def config(self, p_in=0.002, p_out=0.002):
        return ProviderConfig(
            provider_id="p", model_name="m",
            price_per_1k_input_tokens=p_in, price_per_1k_output_tokens=p_out,
        )

    def test_simple_arithmetic(self):
        responses = [
            CompletionResponse(
                text="", input_tokens=800, output_tokens=200,
                provider_id="p", model_name="m",
            )
        ]
        summary = cost_report(responses, self.config())
        assert summary.cost == pytest.approx(0.002)
        assert summary.total_tokens == 1000

    def test_mean_tokens(self):
        responses = [
            CompletionResponse(
                text="", input_tokens=200, output_tokens=26,
                provider_id="p", model_name="m",
            )
        ] * 10
        summary = cost_report(responses, self.config())
        assert summary.mean_tokens_per_response == pytest.approx(226.0)

    def test_reference_constant(self):
        assert MSCOCO_REFERENCE_MEAN_TOKENS == 226.148
