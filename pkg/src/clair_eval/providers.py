"""Provider-agnostic completion clients: HTTP (generic chat-completions wire
shape), deterministic token-overlap mock, replay-from-fixture, plus the
response cache and token/cost accounting.

Transport-level retries (timeouts, 429, 5xx) live here and are distinct from
the parse-failure retries in the scoring orchestration.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import requests

from .core import canonicalize
from .prompting import PromptText

BACKOFF_INITIAL = 1.0
BACKOFF_FACTOR = 2.0
TRANSPORT_ATTEMPTS = 5
RETRYABLE_STATUS = (429, 500, 502, 503, 504)
DEFAULT_MAX_OUTPUT_TOKENS = 300

API_KEY_ENV_PREFIX = "CLAIR_API_KEY_"


class ProviderError(Exception):
    pass


class TransportExhaustedError(ProviderError):
    pass


class AuthenticationError(ProviderError):
    pass


class MalformedProviderReplyError(ProviderError):
    pass


class ReplayMissError(ProviderError):
    """A replay-only provider had no recorded response for the request."""


class CacheCorruptionError(Exception):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    model_name: str
    endpoint: str = ""
    style: str = "chat"  # "chat" | "raw-completion"
    price_per_1k_input_tokens: float = 0.0
    price_per_1k_output_tokens: float = 0.0
    max_concurrent_requests: int = 4
    timeout: float = 60.0
    # Wire field names, overridable per provider profile.
    max_tokens_field: str = "max_tokens"

    def __post_init__(self):
        if self.price_per_1k_input_tokens < 0 or self.price_per_1k_output_tokens < 0:
            raise ValueError("prices must be >= 0")
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be >= 1")
        if self.style not in ("chat", "raw-completion"):
            raise ValueError(f"unknown style {self.style!r}")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: PromptText
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    attempt_index: int = 0

    def __post_init__(self):
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    input_tokens: int
    output_tokens: int
    provider_id: str
    model_name: str
    latency: float = 0.0


def cache_key(provider_id: str, model_name: str, prompt: PromptText,
              temperature: float, attempt_index: int) -> str:
    """Collision-resistant digest over everything that determines a response."""
    payload = "\x1f".join(
        [provider_id, model_name, prompt.body, prompt.completion_prefix or "",
         repr(float(temperature)), str(int(attempt_index))]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Provider(Protocol):
    config: ProviderConfig

    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def api_key_env_var(provider_id: str) -> str:
    return API_KEY_ENV_PREFIX + provider_id.upper().replace("-", "_")


class HttpProvider:
    """Generic chat-completions HTTP client with exponential backoff."""

    def __init__(self, config: ProviderConfig, api_key: Optional[str] = None,
                 session: Optional[requests.Session] = None,
                 sleep: Callable[[float], None] = time.sleep,
                 rng: Optional[random.Random] = None):
        if api_key is None:
            env_var = api_key_env_var(config.provider_id)
            api_key = os.environ.get(env_var)
            if not api_key:
                raise AuthenticationError(
                    f"no API key for provider {config.provider_id!r}: set {env_var}"
                )
        self.config = config
        self._api_key = api_key
        self._session = session or requests.Session()
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._semaphore = threading.Semaphore(config.max_concurrent_requests)

    def _body(self, request: CompletionRequest) -> dict:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": request.prompt.body}],
            "temperature": request.temperature,
            self.config.max_tokens_field: request.max_output_tokens,
        }
        return body

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        headers = {
            "Authorization": f"Bearer {self._api_key}",
            "Content-Type": "application/json",
        }
        delay = BACKOFF_INITIAL
        last_error: Optional[str] = None
        for attempt in range(TRANSPORT_ATTEMPTS):
            if attempt:
                self._sleep(delay * (1.0 + self._rng.random()))
                delay *= BACKOFF_FACTOR
            start = time.monotonic()
            try:
                with self._semaphore:
                    resp = self._session.post(
                        self.config.endpoint, headers=headers,
                        json=self._body(request), timeout=self.config.timeout,
                    )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if resp.status_code in (401, 403):
                raise AuthenticationError(
                    f"provider {self.config.provider_id} rejected credentials "
                    f"(HTTP {resp.status_code})"
                )
            if resp.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise MalformedProviderReplyError(
                    f"unexpected HTTP {resp.status_code} from {self.config.provider_id}"
                )
            return self._parse_reply(resp, time.monotonic() - start)
        raise TransportExhaustedError(
            f"provider {self.config.provider_id} failed after "
            f"{TRANSPORT_ATTEMPTS} attempts: {last_error}"
        )

    def _parse_reply(self, resp: requests.Response, latency: float) -> CompletionResponse:
        try:
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"]
            usage = payload.get("usage", {})
            input_tokens = int(usage.get("prompt_tokens", 0))
            output_tokens = int(usage.get("completion_tokens", 0))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedProviderReplyError(
                f"cannot parse reply from {self.config.provider_id}: {exc}"
            ) from exc
        return CompletionResponse(
            text=text, input_tokens=input_tokens, output_tokens=output_tokens,
            provider_id=self.config.provider_id, model_name=self.config.model_name,
            latency=latency,
        )


def _prompt_caption_lines(body: str) -> tuple[list[str], list[str]]:
    """Recover candidate and reference caption lines from a rendered prompt."""
    lines = body.split("\n")
    cand_start = lines.index("Candidate set:") + 1
    ref_start = lines.index("Reference set:")
    candidates = [ln[2:] for ln in lines[cand_start:ref_start]]
    references = [
        ln[2:] for ln in lines[ref_start + 1 :] if ln.startswith("- ")
    ]
    return candidates, references


def overlap_score(candidates: Sequence[str], references: Sequence[str]) -> int:
    """Jaccard unigram overlap (canonicalized), rounded to an integer percent."""
    cand_set: set[str] = set()
    for text in candidates:
        cand_set.update(canonicalize(text).split())
    ref_set: set[str] = set()
    for text in references:
        ref_set.update(canonicalize(text).split())
    union = cand_set | ref_set
    if not union:
        return 0
    return round(100 * len(cand_set & ref_set) / len(union))


def mock_overlap_response(
    candidates: Sequence[str], references: Sequence[str],
    provider_id: str = "mock", model_name: str = "overlap",
    prompt_words: int = 0,
) -> CompletionResponse:
    """Deterministic offline stand-in: token-overlap score in the real wire text shape."""
    if not candidates or not references:
        raise ValueError("mock provider needs non-empty caption sets")
    score = overlap_score(candidates, references)
    text = json.dumps({"score": score, "reason": f"token overlap {score}%"})
    return CompletionResponse(
        text=text, input_tokens=prompt_words, output_tokens=len(text.split()),
        provider_id=provider_id, model_name=model_name, latency=0.0,
    )


class MockOverlapProvider:
    """Scores by canonicalized unigram Jaccard overlap; fully deterministic."""

    def __init__(self, provider_id: str = "mock"):
        self.config = ProviderConfig(provider_id=provider_id, model_name="overlap")

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        candidates, references = _prompt_caption_lines(request.prompt.body)
        return mock_overlap_response(
            candidates, references,
            provider_id=self.config.provider_id, model_name=self.config.model_name,
            prompt_words=len(request.prompt.body.split()),
        )


class ScriptedProvider:
    """Replays a fixed sequence of reply texts; for retry-ladder fixtures."""

    def __init__(self, replies: Sequence[str], provider_id: str = "scripted"):
        self.config = ProviderConfig(provider_id=provider_id, model_name="scripted")
        self._replies = list(replies)
        self._cursor = 0
        self.calls = 0

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if self._cursor >= len(self._replies):
            raise TransportExhaustedError("scripted provider ran out of replies")
        text = self._replies[self._cursor]
        self._cursor += 1
        self.calls += 1
        return CompletionResponse(
            text=text, input_tokens=len(request.prompt.body.split()),
            output_tokens=len(text.split()),
            provider_id=self.config.provider_id, model_name=self.config.model_name,
        )


def _record_digest(key: str, request: dict, response: dict) -> str:
    blob = json.dumps([key, request, response], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Append-only JSONL response store with an in-memory index.

    Write-once per key: a second put for an existing key is ignored, so the
    first recorded response stays readable forever. Each line carries a digest
    over its own content so corruption is detectable.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._index: dict[str, CompletionResponse] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                key = record["key"]
                if key not in self._index:
                    self._index[key] = CompletionResponse(**record["response"])

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def keys(self) -> list[str]:
        return list(self._index)

    def get(self, key: str) -> Optional[CompletionResponse]:
        return self._index.get(key)

    def put(self, key: str, response: CompletionResponse,
            request_summary: Optional[dict] = None) -> None:
        with self._lock:
            if key in self._index:
                return
            request = request_summary or {}
            response_dict = {
                "text": response.text,
                "input_tokens": response.input_tokens,
                "output_tokens": response.output_tokens,
                "provider_id": response.provider_id,
                "model_name": response.model_name,
                "latency": response.latency,
            }
            record = {
                "key": key,
                "request": request,
                "response": response_dict,
                "digest": _record_digest(key, request, response_dict),
            }
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            self._index[key] = response

    def verify(self) -> list[str]:
        """Return a description of every corrupted line (empty list = clean)."""
        problems = []
        if not self.path.exists():
            return problems
        with self.path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    expected = record["digest"]
                    actual = _record_digest(
                        record["key"], record["request"], record["response"]
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    problems.append(f"line {lineno}: unreadable record ({exc})")
                    continue
                if actual != expected:
                    problems.append(f"line {lineno}: digest mismatch")
        return problems

    def compact(self) -> int:
        """Rewrite the file keeping the first record per key; returns lines dropped."""
        if not self.path.exists():
            return 0
        kept: dict[str, str] = {}
        dropped = 0
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if record["key"] in kept:
                    dropped += 1
                else:
                    kept[record["key"]] = line
        tmp = self.path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for line in kept.values():
                fh.write(line + "\n")
        tmp.replace(self.path)
        return dropped


class ReplayProvider:
    """Serves only recorded responses; never touches the network.

    Raises ReplayMissError on any request absent from the fixture, which makes
    "no network was used" directly assertable in tests.
    """

    def __init__(self, config: ProviderConfig, fixture: ResponseCache):
        self.config = config
        self._fixture = fixture

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = cache_key(
            self.config.provider_id, self.config.model_name,
            request.prompt, request.temperature, request.attempt_index,
        )
        response = self._fixture.get(key)
        if response is None:
            raise ReplayMissError(
                f"no recorded response for provider {self.config.provider_id} "
                f"key {key[:12]}..."
            )
        return response


class CachingProvider:
    """Wraps any provider with read-through, write-once response caching."""

    def __init__(self, inner: Provider, cache: ResponseCache):
        self.config = inner.config
        self._inner = inner
        self._cache = cache

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = cache_key(
            self.config.provider_id, self.config.model_name,
            request.prompt, request.temperature, request.attempt_index,
        )
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        response = self._inner.complete(request)
        self._cache.put(key, response, request_summary={
            "provider_id": self.config.provider_id,
            "model_name": self.config.model_name,
            "temperature": request.temperature,
            "attempt_index": request.attempt_index,
            "prompt_sha256": hashlib.sha256(
                request.prompt.body.encode("utf-8")
            ).hexdigest(),
        })
        return response


@dataclass(frozen=True)
class CostSummary:
    responses: int
    total_input_tokens: int
    total_output_tokens: int
    total_tokens: int
    mean_tokens_per_response: float
    cost: float


# Published reference figure for MS-COCO runs of this measure, echoed in cost
# reports as a comparison point (226.148 mean tokens per sample on the OpenAI
# API, about $0.00033 per sample at GPT-3.5 pricing).
MSCOCO_REFERENCE_MEAN_TOKENS = 226.148


def cost_report(responses: Sequence[CompletionResponse],
                config: ProviderConfig) -> CostSummary:
    """Total/mean token usage and monetary cost at the configured prices."""
    total_in = sum(r.input_tokens for r in responses)
    total_out = sum(r.output_tokens for r in responses)
    n = len(responses)
    cost = (
        total_in * config.price_per_1k_input_tokens
        + total_out * config.price_per_1k_output_tokens
    ) / 1000.0
    return CostSummary(
        responses=n,
        total_input_tokens=total_in,
        total_output_tokens=total_out,
        total_tokens=total_in + total_out,
        mean_tokens_per_response=(total_in + total_out) / n if n else 0.0,
        cost=cost,
    )
