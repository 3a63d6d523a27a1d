"""Shared data model: captions, samples, pairs, groups, and text canonicalization."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

PAIR_CATEGORIES = ("HC", "HI", "HM", "MM")

_WHITESPACE_RUN = re.compile(r"\s+")
_TRAILING_PERIODS = re.compile(r"[.\s]+$")


def canonicalize(text: str) -> str:
    """Normalize caption text for identity checks.

    Trims, collapses internal whitespace runs to single spaces, lowercases,
    and removes terminal periods. Total and idempotent.
    """
    text = _WHITESPACE_RUN.sub(" ", text.strip()).lower()
    return _TRAILING_PERIODS.sub("", text)


@dataclass(frozen=True)
class Caption:
    """One caption line. Newlines are invalid (they would break the one-per-line prompt layout)."""

    text: str

    def violations(self) -> list[str]:
        problems = []
        if not self.text.strip():
            problems.append("caption is empty")
        if "\n" in self.text or "\r" in self.text:
            problems.append("caption contains newline characters")
        return problems


@dataclass(frozen=True)
class EvaluationSample:
    """One candidate caption set scored against one reference caption set."""

    id: str
    candidates: tuple[Caption, ...]
    references: tuple[Caption, ...]
    human_score: Optional[float] = None
    human_scale: Optional[tuple[float, float]] = None
    source: Optional[str] = None
    system: Optional[str] = None


@dataclass(frozen=True)
class PairSample:
    """A two-candidate decision record with a human preference."""

    id: str
    references: tuple[Caption, ...]
    caption_a: Caption
    caption_b: Caption
    category: str
    human_choice: str


@dataclass(frozen=True)
class GroupSample:
    """A candidate caption set rated for coverage and correctness against a reference set."""

    id: str
    candidates: tuple[Caption, ...]
    references: tuple[Caption, ...]
    coverage_rating: float
    correctness_rating: float


def validate_sample(sample: EvaluationSample) -> list[str]:
    """Return every invariant violation; an empty list means the sample is valid."""
    problems: list[str] = []
    if not sample.id:
        problems.append("empty id")
    if not sample.candidates:
        problems.append("empty candidate set")
    if not sample.references:
        problems.append("empty reference set")
    for kind, captions in (("candidate", sample.candidates), ("reference", sample.references)):
        for i, cap in enumerate(captions):
            for issue in cap.violations():
                problems.append(f"{kind} {i}: {issue}")
    if sample.human_score is not None:
        if sample.human_scale is None:
            problems.append("human_score present without human_scale")
        else:
            lo, hi = sample.human_scale
            if not (lo <= sample.human_score <= hi):
                problems.append(
                    f"rating out of scale: {sample.human_score} not in [{lo}, {hi}]"
                )
    if sample.system is not None and not sample.system:
        problems.append("empty system tag")
    return problems


def validate_pair(pair: PairSample) -> list[str]:
    problems: list[str] = []
    if not pair.id:
        problems.append("empty id")
    if not pair.references:
        problems.append("empty reference set")
    if pair.category not in PAIR_CATEGORIES:
        problems.append(f"unknown category {pair.category!r}")
    if pair.human_choice not in ("A", "B"):
        problems.append(f"human_choice must be 'A' or 'B', got {pair.human_choice!r}")
    for name, cap in (("caption_a", pair.caption_a), ("caption_b", pair.caption_b)):
        for issue in cap.violations():
            problems.append(f"{name}: {issue}")
    for i, cap in enumerate(pair.references):
        for issue in cap.violations():
            problems.append(f"reference {i}: {issue}")
    return problems


def validate_group(group: GroupSample) -> list[str]:
    problems: list[str] = []
    if not group.id:
        problems.append("empty id")
    if not group.candidates:
        problems.append("empty candidate set")
    if not group.references:
        problems.append("empty reference set")
    for name, rating in (
        ("coverage_rating", group.coverage_rating),
        ("correctness_rating", group.correctness_rating),
    ):
        if rating is None or not math.isfinite(rating):
            problems.append(f"{name} is missing or non-finite")
    for kind, captions in (("candidate", group.candidates), ("reference", group.references)):
        for i, cap in enumerate(captions):
            for issue in cap.violations():
                problems.append(f"{kind} {i}: {issue}")
    return problems
