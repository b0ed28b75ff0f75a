"""Pure-Python n-gram scoring kernels.

Reference implementation of the character F-score and sentence BLEU
kernels. The compiled extension in ``_ckernels`` mirrors this module
operation for operation (same accumulation order) so both backends
agree to floating-point noise; tests hold them to 1e-12.
"""

from __future__ import annotations

import math


def _strip_whitespace(text: str) -> str:
    return "".join(ch for ch in text if not ch.isspace())


def _clipped_char_matches(cand: str, ref: str, n: int) -> int:
    cand_counts: dict[str, int] = {}
    for i in range(len(cand) - n + 1):
        gram = cand[i : i + n]
        cand_counts[gram] = cand_counts.get(gram, 0) + 1
    ref_counts: dict[str, int] = {}
    for i in range(len(ref) - n + 1):
        gram = ref[i : i + n]
        ref_counts[gram] = ref_counts.get(gram, 0) + 1
    matches = 0
    for gram, count in cand_counts.items():
        other = ref_counts.get(gram, 0)
        matches += count if count < other else other
    return matches


def chrf_score(candidate: str, reference: str, max_order: int, beta: float) -> float:
    """Character n-gram F_beta in [0, 1].

    Whitespace is removed from both sides before counting. Precisions and
    recalls are averaged over the orders for which either side has at
    least one n-gram; orders where both sides are too short are skipped.
    Two empty strings score 1.0.
    """
    cand = _strip_whitespace(candidate)
    ref = _strip_whitespace(reference)
    sum_p = 0.0
    sum_r = 0.0
    orders = 0
    for n in range(1, max_order + 1):
        total_cand = len(cand) - n + 1
        total_ref = len(ref) - n + 1
        if total_cand <= 0 and total_ref <= 0:
            continue
        orders += 1
        if total_cand <= 0 or total_ref <= 0:
            continue
        matches = _clipped_char_matches(cand, ref, n)
        sum_p += matches / total_cand
        sum_r += matches / total_ref
    if orders == 0:
        return 1.0
    precision = sum_p / orders
    recall = sum_r / orders
    if precision + recall == 0.0:
        return 0.0
    beta_sq = beta * beta
    return (1.0 + beta_sq) * precision * recall / (beta_sq * precision + recall)


def _clipped_token_matches(cand: list[str], ref: list[str], n: int) -> int:
    cand_counts: dict[tuple[str, ...], int] = {}
    for i in range(len(cand) - n + 1):
        gram = tuple(cand[i : i + n])
        cand_counts[gram] = cand_counts.get(gram, 0) + 1
    ref_counts: dict[tuple[str, ...], int] = {}
    for i in range(len(ref) - n + 1):
        gram = tuple(ref[i : i + n])
        ref_counts[gram] = ref_counts.get(gram, 0) + 1
    matches = 0
    for gram, count in cand_counts.items():
        other = ref_counts.get(gram, 0)
        matches += count if count < other else other
    return matches


def sentence_bleu_score(candidate: str, reference: str, max_order: int) -> float:
    """Sentence BLEU in [0, 100] over whitespace tokens.

    Order 1 is unsmoothed; higher orders use add-one smoothing on both
    numerator and denominator. Zero unigram matches (or an empty
    candidate) score 0. Brevity penalty exp(1 - |ref|/|cand|) applies
    when the candidate is shorter than the reference.
    """
    cand_tokens = candidate.split()
    ref_tokens = reference.split()
    cand_len = len(cand_tokens)
    ref_len = len(ref_tokens)
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_order + 1):
        total = cand_len - n + 1
        if total < 0:
            total = 0
        matches = _clipped_token_matches(cand_tokens, ref_tokens, n)
        if n == 1:
            if matches == 0:
                return 0.0
            p = matches / total
        else:
            p = (matches + 1.0) / (total + 1.0)
        log_sum += math.log(p)
    geometric_mean = math.exp(log_sum / max_order)
    if cand_len < ref_len:
        brevity = math.exp(1.0 - ref_len / cand_len)
    else:
        brevity = 1.0
    return 100.0 * brevity * geometric_mean
