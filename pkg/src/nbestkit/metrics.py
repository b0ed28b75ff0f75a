"""Built-in lexical utility metrics and the utility-function abstraction.

chrF and sentence BLEU are total, deterministic functions; the heavy
n-gram counting lives in ``nbestkit._kernels`` (compiled extension when
available, pure Python otherwise). Neural metrics attach out of process
through the scorer protocol client in ``nbestkit.scorer``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from nbestkit import _kernels

KERNEL_BACKEND = _kernels.BACKEND


def chrf(candidate: str, reference: str, max_order: int = 6, beta: float = 2.0) -> float:
    """Character n-gram F_beta score in [0, 1].

    Whitespace is stripped from the character stream first (so word
    boundaries do not count). Per-order clipped precisions and recalls
    are arithmetic-averaged over the orders where either string has at
    least one n-gram. Identical strings score 1.0; two empty strings
    score 1.0; disjoint character sets score 0.0.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    return _kernels.chrf_score(candidate, reference, max_order, beta)


def sentence_bleu(candidate: str, reference: str, max_order: int = 4) -> float:
    """Sentence-level BLEU in [0, 100] over whitespace tokens.

    Clipped n-gram precisions use add-one smoothing on numerator and
    denominator for orders >= 2 (order 1 unsmoothed), combined by
    geometric mean and scaled by the brevity penalty
    exp(1 - |ref|/|cand|) when the candidate is shorter. A candidate
    with no unigram match (or no tokens) scores 0.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    return _kernels.sentence_bleu_score(candidate, reference, max_order)


@dataclass(frozen=True)
class UtilityFunction:
    """A deterministic similarity score with declared capabilities.

    ``fn(candidate, reference, source)`` must return a value inside
    ``score_range`` for every input; matrix construction surfaces (does
    not clamp) violations.
    """

    name: str
    needs_reference: bool
    needs_source: bool
    score_range: tuple[float, float]
    fn: Callable[[str, str | None, str | None], float]

    def score(self, candidate: str, reference: str | None = None, source: str | None = None) -> float:
        if self.needs_reference and reference is None:
            raise ValueError(f"utility {self.name!r} requires a reference")
        if self.needs_source and source is None:
            raise ValueError(f"utility {self.name!r} requires the source")
        return self.fn(candidate, reference, source)


CHRF_UTILITY = UtilityFunction(
    name="chrf",
    needs_reference=True,
    needs_source=False,
    score_range=(0.0, 1.0),
    fn=lambda candidate, reference, source: chrf(candidate, reference or ""),
)

SENTENCE_BLEU_UTILITY = UtilityFunction(
    name="sentence_bleu",
    needs_reference=True,
    needs_source=False,
    score_range=(0.0, 100.0),
    fn=lambda candidate, reference, source: sentence_bleu(candidate, reference or ""),
)

BUILTIN_UTILITIES = {u.name: u for u in (CHRF_UTILITY, SENTENCE_BLEU_UTILITY)}
BUILTIN_UTILITIES["bleu"] = SENTENCE_BLEU_UTILITY


def get_utility(name: str) -> UtilityFunction:
    try:
        return BUILTIN_UTILITIES[name]
    except KeyError:
        raise KeyError(f"no built-in utility named {name!r}; built-ins: chrf, sentence_bleu") from None
