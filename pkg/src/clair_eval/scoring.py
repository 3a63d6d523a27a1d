"""CLAIR scoring orchestration: prompt -> provider -> parser with the retry
ladder, per-provider judgments, and the multi-model ensemble score.

The ladder: one attempt at the primary temperature; on parse failure, up to
max_retries fresh attempts at the retry temperature; if every attempt fails,
the judgment falls back to score 0 with reason "Unknown".
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import parsing
from .core import EvaluationSample
from .prompting import build_prompt, completion_prefix_for
from .providers import (
    CompletionRequest,
    Provider,
    ProviderError,
)

EXHAUSTED_FALLBACK = "exhausted-fallback"


@dataclass(frozen=True)
class RetryPolicy:
    primary_temperature: float = 0.0
    retry_temperature: float = 1.0
    max_retries: int = 3
    fallback_score: float = 0.0
    # Drop exhausted-fallback judgments from the ensemble instead of counting
    # them as 0 (sensitivity analysis only; 0 participation is the default).
    drop_exhausted: bool = False

    def __post_init__(self):
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        for t in (self.primary_temperature, self.retry_temperature):
            if not (0.0 <= t <= 2.0):
                raise ValueError("temperatures must be in [0, 2]")


@dataclass(frozen=True)
class Judgment:
    provider_id: str
    score: float
    reason: str
    outcome: str  # json-success | digit-fallback | exhausted-fallback
    attempts: int
    input_tokens: int = 0
    output_tokens: int = 0
    raw_texts: tuple[str, ...] = ()  # every attempt's raw output, for audit


@dataclass(frozen=True)
class ClairScore:
    value: float  # in [0, 1]
    members: tuple[Judgment, ...]


def score_sample(
    sample: EvaluationSample,
    provider: Provider,
    policy: RetryPolicy = RetryPolicy(),
    attempt_base: int = 0,
) -> Judgment:
    """Score one sample with one provider, applying the full retry ladder.

    attempt_base offsets the cache-key attempt dimension so independent
    repeat scorings of the same sample do not collide in the cache.
    """
    prefix = completion_prefix_for(provider.config.style)
    prompt = build_prompt(sample.candidates, sample.references, completion_prefix=prefix)
    raw_texts: list[str] = []
    input_tokens = 0
    output_tokens = 0
    attempts = 0
    for attempt_index in range(1 + policy.max_retries):
        temperature = (
            policy.primary_temperature if attempt_index == 0 else policy.retry_temperature
        )
        request = CompletionRequest(
            prompt=prompt,
            temperature=temperature,
            attempt_index=attempt_base + attempt_index,
        )
        response = provider.complete(request)
        attempts += 1
        input_tokens += response.input_tokens
        output_tokens += response.output_tokens
        text = (prefix or "") + response.text
        raw_texts.append(text)
        parsed = parsing.parse_judgment(text)
        if parsed is not None:
            return Judgment(
                provider_id=provider.config.provider_id,
                score=parsed.score,
                reason=parsed.reason,
                outcome=parsed.outcome,
                attempts=attempts,
                input_tokens=input_tokens,
                output_tokens=output_tokens,
                raw_texts=tuple(raw_texts),
            )
    return Judgment(
        provider_id=provider.config.provider_id,
        score=policy.fallback_score,
        reason="Unknown",
        outcome=EXHAUSTED_FALLBACK,
        attempts=attempts,
        input_tokens=input_tokens,
        output_tokens=output_tokens,
        raw_texts=tuple(raw_texts),
    )


def score_sample_spread(
    sample: EvaluationSample,
    provider: Provider,
    policy: RetryPolicy = RetryPolicy(),
    repeats: int = 1,
) -> tuple[list[Judgment], float, float, float]:
    """Run N independent scorings of one sample; returns (judgments, mean, min, max).

    Useful for quantifying run-to-run variance of a nondeterministic provider.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    stride = 1 + policy.max_retries
    judgments = [
        score_sample(sample, provider, policy, attempt_base=i * stride)
        for i in range(repeats)
    ]
    scores = [j.score for j in judgments]
    return judgments, sum(scores) / len(scores), min(scores), max(scores)


def ensemble(judgments: Sequence[Judgment], drop_exhausted: bool = False) -> ClairScore:
    """Unweighted average of member scores, normalized to [0, 1].

    Exhausted-fallback members participate with their score of 0 unless
    drop_exhausted is set (and at least one non-exhausted member exists).
    """
    if not judgments:
        raise ValueError("ensemble needs at least one judgment")
    members = tuple(judgments)
    scored = members
    if drop_exhausted:
        kept = tuple(j for j in members if j.outcome != EXHAUSTED_FALLBACK)
        if kept:
            scored = kept
    # fsum keeps the mean exactly permutation-invariant.
    value = math.fsum(j.score for j in scored) / len(scored) / 100.0
    return ClairScore(value=value, members=members)


@dataclass
class DatasetScores:
    """Per-sample judgments and ensemble values, in input sample order."""

    sample_ids: list[str] = field(default_factory=list)
    judgments: dict[str, dict[str, Judgment]] = field(default_factory=dict)
    ensembles: dict[str, ClairScore] = field(default_factory=dict)
    failures: dict[str, dict[str, str]] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        """JSON-serializable score-table rows (stable field order)."""
        out = []
        for sample_id in self.sample_ids:
            row: dict = {"id": sample_id, "providers": {}}
            for provider_id in sorted(self.judgments.get(sample_id, {})):
                j = self.judgments[sample_id][provider_id]
                row["providers"][provider_id] = {
                    "score": j.score,
                    "reason": j.reason,
                    "outcome": j.outcome,
                    "attempts": j.attempts,
                    "input_tokens": j.input_tokens,
                    "output_tokens": j.output_tokens,
                }
            if sample_id in self.ensembles:
                row["clair"] = self.ensembles[sample_id].value
            if sample_id in self.failures:
                row["errors"] = dict(sorted(self.failures[sample_id].items()))
            out.append(row)
        return out


def score_dataset(
    samples: Sequence[EvaluationSample],
    providers: Sequence[Provider],
    policy: RetryPolicy = RetryPolicy(),
    parallelism: int = 1,
) -> DatasetScores:
    """Score every sample with every provider.

    Per-sample transport failures are collected, not raised: one unreachable
    provider leaves the other providers' columns complete. The result table is
    assembled in input order regardless of completion order.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    result = DatasetScores(sample_ids=[s.id for s in samples])

    def run_one(sample: EvaluationSample, provider: Provider):
        try:
            return sample.id, provider.config.provider_id, score_sample(sample, provider, policy), None
        except ProviderError as exc:
            return sample.id, provider.config.provider_id, None, str(exc)

    tasks = [(s, p) for s in samples for p in providers]
    if parallelism == 1:
        outcomes = [run_one(s, p) for s, p in tasks]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(lambda t: run_one(*t), tasks))

    for sample_id, provider_id, judgment, error in outcomes:
        if judgment is not None:
            result.judgments.setdefault(sample_id, {})[provider_id] = judgment
        else:
            result.failures.setdefault(sample_id, {})[provider_id] = error
    for sample_id in result.sample_ids:
        per_provider = result.judgments.get(sample_id, {})
        if per_provider:
            members = [per_provider[pid] for pid in sorted(per_provider)]
            result.ensembles[sample_id] = ensemble(
                members, drop_exhausted=policy.drop_exhausted
            )
    return result
