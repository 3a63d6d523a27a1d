"""Deterministic rendering of the caption-similarity judging prompt.

The template bytes are pinned: cache keys hash the rendered prompt, so any
change to the wording or layout invalidates every cached response.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .core import Caption

HEADER = (
    "You are trying to tell if a candidate set of captions is describing the "
    "same image as a reference set of captions."
)
QUESTION = (
    "On a precise scale from 0 to 100, how likely is it that the candidate set "
    "is describing the same image as the reference set? (JSON format, with a "
    'key "score", value between 0 and 100, and a key "reason" with a string '
    "value.)"
)
FIXED_LINE_COUNT = 4  # header, "Candidate set:", "Reference set:", question

# Prepended to the raw generation of non-chat models before parsing, to steer
# them into the JSON output format.
RAW_COMPLETION_PREFIX = '{"score":'


class EmptyCaptionSetError(ValueError):
    pass


@dataclass(frozen=True)
class PromptText:
    body: str
    completion_prefix: Optional[str] = None


def build_prompt(
    candidates: Sequence[Caption],
    references: Sequence[Caption],
    completion_prefix: Optional[str] = None,
) -> PromptText:
    """Render the judging prompt; byte-deterministic for fixed inputs.

    Captions appear in input order, one per line, each prefixed "- ". Lines are
    joined with single newlines and there is no trailing newline.
    """
    if not candidates:
        raise EmptyCaptionSetError("candidate set is empty")
    if not references:
        raise EmptyCaptionSetError("reference set is empty")
    for cap in list(candidates) + list(references):
        if "\n" in cap.text or "\r" in cap.text:
            raise ValueError(f"caption contains a newline: {cap.text!r}")
    lines = [HEADER, "Candidate set:"]
    lines.extend(f"- {cap.text}" for cap in candidates)
    lines.append("Reference set:")
    lines.extend(f"- {cap.text}" for cap in references)
    lines.append(QUESTION)
    return PromptText(body="\n".join(lines), completion_prefix=completion_prefix)


def completion_prefix_for(provider_style: str) -> Optional[str]:
    """Return the steering prefix for raw-completion providers, nothing for chat providers."""
    if provider_style == "raw-completion":
        return RAW_COMPLETION_PREFIX
    if provider_style == "chat":
        return None
    raise ValueError(f"unknown provider style {provider_style!r}")
