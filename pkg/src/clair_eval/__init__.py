"""Caption-judging toolkit: LLM-prompted similarity scoring with a multi-model
ensemble, classical n-gram baselines, and correlation/decision evaluation
protocols, all testable offline through deterministic mock providers."""

from .core import Caption, EvaluationSample, GroupSample, PairSample, canonicalize
from .scoring import ClairScore, Judgment, RetryPolicy, ensemble, score_sample

__all__ = [
    "Caption",
    "ClairScore",
    "EvaluationSample",
    "GroupSample",
    "Judgment",
    "PairSample",
    "RetryPolicy",
    "canonicalize",
    "ensemble",
    "score_sample",
]

__version__ = "0.1.0"
