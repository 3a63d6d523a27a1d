"""Correlation statistics and decision-accuracy protocols.

Implements Kendall's tau (b and c variants), Spearman, Pearson, pairwise
decision accuracy with tie credit, system-level correlation over per-system
means, and caption-group correlation. p-values use exact permutation
enumeration for n <= 8 and the usual asymptotic approximations above that.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from scipy.special import stdtr

from .core import GroupSample, PairSample
from .kernels import kendall_pair_counts

EXACT_PERMUTATION_MAX_N = 8

TIE_POLICY_HALF = "half"
TIE_POLICY_WRONG = "wrong"


class DegenerateInputError(ValueError):
    """Raised when a correlation is undefined (constant input vector)."""


@dataclass(frozen=True)
class CorrelationResult:
    statistic_name: str  # "tau-b" | "tau-c" | "spearman" | "pearson"
    value: float
    p_value: float
    n: int


def _check_paired(x: Sequence[float], y: Sequence[float]) -> None:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError("need at least 2 paired observations")
    for v in itertools.chain(x, y):
        if not math.isfinite(v):
            raise ValueError("non-finite value in input vector")


def _is_constant(v: Sequence[float]) -> bool:
    return min(v) == max(v)


def rank_average(values: Sequence[float]) -> list[float]:
    """Average ranks (1-based); ties share the mean of their rank positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _tau_value(x: Sequence[float], y: Sequence[float], variant: str) -> float:
    concordant, discordant, tied_x, tied_y, _ = kendall_pair_counts(x, y)
    diff = concordant - discordant
    if variant == "b":
        denom_x = concordant + discordant + tied_x
        denom_y = concordant + discordant + tied_y
        if denom_x == 0 or denom_y == 0:
            return 0.0
        return diff / math.sqrt(denom_x * denom_y)
    if variant == "c":
        n = len(x)
        m = min(len(set(x)), len(set(y)))
        return 2.0 * m * diff / (n * n * (m - 1))
    raise ValueError(f"unknown tau variant {variant!r}")


def _exact_permutation_p(
    x: Sequence[float], y: Sequence[float], statistic
) -> float:
    """Two-sided exact p-value: fraction of permutations of y with |stat| >= |observed|."""
    observed = abs(statistic(x, y))
    count = 0
    total = 0
    for perm in itertools.permutations(y):
        total += 1
        if abs(statistic(x, perm)) >= observed - 1e-12:
            count += 1
    return count / total


def kendall_tau(
    x: Sequence[float], y: Sequence[float], variant: str = "b"
) -> CorrelationResult:
    """Kendall rank correlation with tie corrections."""
    _check_paired(x, y)
    if _is_constant(x) or _is_constant(y):
        raise DegenerateInputError("kendall tau undefined for constant input")
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    value = _tau_value(x, y, variant)
    n = len(x)
    if n <= EXACT_PERMUTATION_MAX_N:
        p = _exact_permutation_p(x, y, lambda a, b: _tau_value(a, b, variant))
    else:
        concordant, discordant, *_ = kendall_pair_counts(x, y)
        z = 3.0 * (concordant - discordant) / math.sqrt(n * (n - 1) * (2 * n + 5) / 2.0)
        p = 2.0 * _normal_sf(abs(z))
    return CorrelationResult(f"tau-{variant}", value, min(p, 1.0), n)


def _pearson_value(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(x, y))
    var_x = sum((a - mean_x) ** 2 for a in x)
    var_y = sum((b - mean_y) ** 2 for b in y)
    if var_x == 0.0 or var_y == 0.0:
        raise DegenerateInputError("pearson undefined for constant input")
    return max(-1.0, min(1.0, cov / math.sqrt(var_x * var_y)))


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson product-moment correlation with a two-sided t-approximation p-value."""
    _check_paired(x, y)
    if _is_constant(x) or _is_constant(y):
        raise DegenerateInputError("pearson undefined for constant input")
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    value = _pearson_value(x, y)
    n = len(x)
    if n <= EXACT_PERMUTATION_MAX_N:
        p = _exact_permutation_p(x, y, _pearson_value)
    else:
        if abs(value) >= 1.0:
            p = 0.0
        else:
            t = value * math.sqrt((n - 2) / (1.0 - value * value))
            p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return CorrelationResult("pearson", value, min(p, 1.0), n)


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Spearman rho: Pearson correlation of average-ranked vectors."""
    _check_paired(x, y)
    if _is_constant(x) or _is_constant(y):
        raise DegenerateInputError("spearman undefined for constant input")
    rx = rank_average([float(v) for v in x])
    ry = rank_average([float(v) for v in y])
    value = _pearson_value(rx, ry)
    n = len(x)
    if n <= EXACT_PERMUTATION_MAX_N:
        p = _exact_permutation_p(rx, ry, _pearson_value)
    else:
        if abs(value) >= 1.0:
            p = 0.0
        else:
            t = value * math.sqrt((n - 2) / (1.0 - value * value))
            p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return CorrelationResult("spearman", value, min(p, 1.0), n)


@dataclass(frozen=True)
class PairwiseAccuracy:
    per_category: dict[str, float]
    counts: dict[str, int]
    overall: float  # unweighted mean over present categories


def pairwise_accuracy(
    pairs: Sequence[PairSample],
    score_a: Sequence[float],
    score_b: Sequence[float],
    tie_policy: str = TIE_POLICY_HALF,
) -> PairwiseAccuracy:
    """Fraction of pairs where the higher-scored caption matches the human choice.

    Exact score ties credit 0.5 under the "half" policy and 0 under "wrong".
    The overall figure is the unweighted mean of the per-category accuracies.
    """
    if not (len(pairs) == len(score_a) == len(score_b)):
        raise ValueError("pairs and score vectors must align")
    if tie_policy not in (TIE_POLICY_HALF, TIE_POLICY_WRONG):
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    credit: dict[str, float] = {}
    counts: dict[str, int] = {}
    for pair, sa, sb in zip(pairs, score_a, score_b):
        if sa == sb:
            points = 0.5 if tie_policy == TIE_POLICY_HALF else 0.0
        else:
            predicted = "A" if sa > sb else "B"
            points = 1.0 if predicted == pair.human_choice else 0.0
        credit[pair.category] = credit.get(pair.category, 0.0) + points
        counts[pair.category] = counts.get(pair.category, 0) + 1
    per_category = {cat: credit[cat] / counts[cat] for cat in counts}
    overall = sum(per_category.values()) / len(per_category) if per_category else 0.0
    return PairwiseAccuracy(per_category=per_category, counts=counts, overall=overall)


def system_level(
    system_tags: Sequence[str],
    metric_scores: Sequence[float],
    human_scores: Sequence[float],
    tau_variant: str = "b",
) -> dict[str, CorrelationResult]:
    """Correlations between per-system mean metric scores and mean human scores."""
    if not (len(system_tags) == len(metric_scores) == len(human_scores)):
        raise ValueError("system tags and score vectors must align")
    sums: dict[str, list[float]] = {}
    for tag, m, h in zip(system_tags, metric_scores, human_scores):
        if not tag:
            raise ValueError("empty system tag")
        entry = sums.setdefault(tag, [0.0, 0.0, 0.0])
        entry[0] += m
        entry[1] += h
        entry[2] += 1.0
    if len(sums) < 2:
        raise ValueError("system-level correlation needs at least 2 systems")
    systems = sorted(sums)
    metric_means = [sums[s][0] / sums[s][2] for s in systems]
    human_means = [sums[s][1] / sums[s][2] for s in systems]
    return {
        "tau": kendall_tau(metric_means, human_means, variant=tau_variant),
        "spearman": spearman(metric_means, human_means),
        "pearson": pearson(metric_means, human_means),
    }


def group_correlation(
    groups: Sequence[GroupSample], metric_scores: Sequence[float]
) -> tuple[CorrelationResult, CorrelationResult]:
    """Pearson of metric scores vs coverage and vs correctness ratings."""
    if len(groups) != len(metric_scores):
        raise ValueError("groups and score vector must align")
    coverage = [g.coverage_rating for g in groups]
    correctness = [g.correctness_rating for g in groups]
    return (
        pearson(metric_scores, coverage),
        pearson(metric_scores, correctness),
    )
