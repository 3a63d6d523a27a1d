"""Tiered extraction of (score, reason) from raw model output.

Tier 1: first balanced braced block parsed as strict JSON with a numeric
"score". Tier 2: first maximal digit run anywhere in the text, reason
"Unknown". Tier 3: no digits at all -> parse failure (a value, not an
exception; the caller's retry policy consumes it).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Optional

JSON_SUCCESS = "json-success"
DIGIT_FALLBACK = "digit-fallback"

_DIGIT_RUN = re.compile(r"\d+")


@dataclass(frozen=True)
class ParsedJudgment:
    score: float  # always within [0, 100]
    reason: str
    outcome: str  # JSON_SUCCESS or DIGIT_FALLBACK


def extract_first_braced_block(text: str) -> Optional[str]:
    """Return the substring from the first '{' to its balanced '}', or None.

    The scan is string-aware: braces inside double-quoted JSON string literals
    (with backslash escapes) do not affect the depth count.
    """
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def _clamp(score: float) -> float:
    return min(100.0, max(0.0, score))


def _coerce_score(value: object) -> Optional[float]:
    """Accept ints, floats, and numeric strings; reject everything else."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        score = float(value)
    elif isinstance(value, str):
        try:
            score = float(value.strip())
        except ValueError:
            return None
    else:
        return None
    return score if math.isfinite(score) else None


def parse_judgment(text: str) -> Optional[ParsedJudgment]:
    """Parse model output into a judgment, or None when no score can be recovered."""
    block = extract_first_braced_block(text)
    if block is not None:
        try:
            payload = json.loads(block)
        except json.JSONDecodeError:
            payload = None
        if isinstance(payload, dict):
            score = _coerce_score(payload.get("score"))
            if score is not None:
                reason = payload.get("reason")
                return ParsedJudgment(
                    score=_clamp(score),
                    reason=str(reason) if reason is not None else "",
                    outcome=JSON_SUCCESS,
                )
    match = _DIGIT_RUN.search(text)
    if match is not None:
        return ParsedJudgment(
            score=_clamp(float(int(match.group()))),
            reason="Unknown",
            outcome=DIGIT_FALLBACK,
        )
    return None
