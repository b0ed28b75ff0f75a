"""Kernel backend selection.

Prefers the compiled extension when it imported cleanly; otherwise (or
when ``NBESTKIT_PURE=1`` is set) the pure-Python kernels are used.
``BACKEND`` records which one is active. The compiled kernels only
cover the packable orders (chrF <= 6, BLEU <= 4); larger orders are
routed to the pure implementation transparently.
"""

from __future__ import annotations

import os

from nbestkit._kernels import _pykernels

_CHRF_MAX_PACKED_ORDER = 6
_BLEU_MAX_PACKED_ORDER = 4

if os.environ.get("NBESTKIT_PURE") == "1":
    _ckernels = None
else:
    try:
        from nbestkit._kernels import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        _ckernels = None

BACKEND = "c" if _ckernels is not None else "python"


def chrf_score(candidate: str, reference: str, max_order: int, beta: float) -> float:
    if _ckernels is not None and max_order <= _CHRF_MAX_PACKED_ORDER:
        return _ckernels.chrf_score(candidate, reference, max_order, beta)
    return _pykernels.chrf_score(candidate, reference, max_order, beta)


def sentence_bleu_score(candidate: str, reference: str, max_order: int) -> float:
    if _ckernels is not None and max_order <= _BLEU_MAX_PACKED_ORDER:
        return _ckernels.sentence_bleu_score(candidate, reference, max_order)
    return _pykernels.sentence_bleu_score(candidate, reference, max_order)
