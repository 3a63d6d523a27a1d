"""Classical text-only caption metrics: BLEU@1/@4, ROUGE-L, CIDEr-D.

Sentence-level variants throughout, since the evaluation protocols correlate
per-sample scores with per-sample human ratings. Parameterizations follow the
standard captioning-toolkit settings and are pinned here as constants.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from .core import canonicalize
from .kernels import lcs_length

BLEU_EPSILON = 1e-9
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0
CIDER_MAX_N = 4
CIDER_SCALE = 10.0

# Punctuation maps to a space before splitting, so "dog-park" -> ["dog", "park"].
_PUNCTUATION = r"""!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~"""
_PUNCT_TABLE = str.maketrans({ch: " " for ch in _PUNCTUATION})


class EmptyReferencesError(ValueError):
    pass


class CorpusTooSmallError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Canonicalize, replace punctuation with spaces, split on whitespace."""
    return canonicalize(text).translate(_PUNCT_TABLE).split()


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4
) -> float:
    """Sentence-level BLEU with per-n-gram clipping and epsilon smoothing.

    Brevity penalty uses the reference length closest to the candidate length
    (ties broken toward the shorter reference).
    """
    if not references:
        raise EmptyReferencesError("bleu requires at least one reference")
    c = len(candidate)
    if c == 0:
        return 0.0
    precisions = []
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(candidate, n)
        total = sum(cand_counts.values())
        if total == 0:
            precisions.append(BLEU_EPSILON)
            continue
        clipped = 0
        for gram, count in cand_counts.items():
            max_ref = max(_ngram_counts(ref, n)[gram] for ref in references)
            clipped += min(count, max_ref)
        precisions.append(clipped / total if clipped else BLEU_EPSILON)
    geo_mean = math.prod(precisions) ** (1.0 / max_n)
    r = min((len(ref) for ref in references), key=lambda rl: (abs(rl - c), rl))
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * geo_mean


def _lcs(a: Sequence[str], b: Sequence[str]) -> int:
    vocab: dict[str, int] = {}
    ids_a = [vocab.setdefault(tok, len(vocab)) for tok in a]
    ids_b = [vocab.setdefault(tok, len(vocab)) for tok in b]
    return lcs_length(ids_a, ids_b)


def rouge_l(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """LCS-based F-measure with recall weight beta, max over references."""
    if not references:
        raise EmptyReferencesError("rouge_l requires at least one reference")
    best = 0.0
    beta_sq = ROUGE_BETA**2
    for ref in references:
        if not candidate or not ref:
            continue
        lcs = _lcs(candidate, ref)
        if lcs == 0:
            continue
        precision = lcs / len(candidate)
        recall = lcs / len(ref)
        f = (1 + beta_sq) * precision * recall / (recall + beta_sq * precision)
        best = max(best, f)
    return best


def _tfidf_vector(
    counts: Counter, doc_freq: Counter, num_docs: int
) -> tuple[dict, float]:
    vec = {}
    norm_sq = 0.0
    for gram, count in counts.items():
        idf = math.log(num_docs / max(1.0, float(doc_freq[gram])))
        weight = count * idf
        vec[gram] = weight
        norm_sq += weight * weight
    return vec, math.sqrt(norm_sq)


def cider(
    corpus: Sequence[tuple[Sequence[str], Sequence[Sequence[str]]]],
) -> list[float]:
    """CIDEr-D over a corpus of (candidate, references) token sequences.

    Document frequencies come from the reference sets (one document per
    sample); similarity is a clipped tf-idf cosine per n, gaussian length
    penalty, averaged over references and n, scaled by 10. Range [0, 10].
    """
    if len(corpus) < 2:
        raise CorpusTooSmallError("cider idf needs a corpus of at least 2 samples")
    for _, references in corpus:
        if not references:
            raise EmptyReferencesError("cider requires at least one reference per sample")
    num_docs = len(corpus)
    doc_freqs = [Counter() for _ in range(CIDER_MAX_N)]
    for _, references in corpus:
        for n in range(1, CIDER_MAX_N + 1):
            seen = set()
            for ref in references:
                seen.update(_ngram_counts(ref, n))
            doc_freqs[n - 1].update(seen)

    scores = []
    for candidate, references in corpus:
        per_n_total = [0.0] * CIDER_MAX_N
        for n in range(1, CIDER_MAX_N + 1):
            cand_counts = _ngram_counts(candidate, n)
            cand_vec, cand_norm = _tfidf_vector(cand_counts, doc_freqs[n - 1], num_docs)
            for ref in references:
                ref_counts = _ngram_counts(ref, n)
                ref_vec, ref_norm = _tfidf_vector(ref_counts, doc_freqs[n - 1], num_docs)
                if cand_norm == 0.0 or ref_norm == 0.0:
                    continue
                dot = sum(
                    min(weight, ref_vec[gram]) * ref_vec[gram]
                    for gram, weight in cand_vec.items()
                    if gram in ref_vec
                )
                delta = float(len(candidate) - len(ref))
                penalty = math.exp(-(delta**2) / (2.0 * CIDER_SIGMA**2))
                per_n_total[n - 1] += (dot / (cand_norm * ref_norm)) * penalty
        score = sum(total / len(references) for total in per_n_total) / CIDER_MAX_N
        scores.append(score * CIDER_SCALE)
    return scores
