"""Selection kernels over pairwise utility matrices.

Entry convention (load-bearing for asymmetric utilities): rows are
candidates, columns are pseudo-references, so
``entries[i][j] = u(candidate=text_i, reference=text_j, source)``.
Consensus selection averages each row; the diversity statistic reuses
the same matrix so it costs zero extra scoring calls. Ties always break
to the lowest index (earliest generated), which keeps runs reproducible
across platforms.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from nbestkit.corpus import EnsembleSelection, HypothesisSet, write_jsonl_atomic
from nbestkit.metrics import UtilityFunction
from nbestkit.scorer import ScoreRequest, ScorerHandle


class UtilityRangeError(ValueError):
    """A utility returned a score outside its declared range."""


@dataclass(frozen=True)
class UtilityMatrix:
    """Pairwise utility scores for one segment's hypothesis set.

    ``texts`` are carried alongside the entries so selections can be
    materialized from the matrix alone. ``utility_range`` is None when
    the scores came from a wire scorer (the protocol declares no range).
    The matrix is n x m with m <= n: the first m hypotheses served as
    pseudo-references.
    """

    segment_id: str
    texts: tuple[str, ...]
    entries: tuple[tuple[float, ...], ...]
    utility_name: str
    utility_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "texts", tuple(self.texts))
        object.__setattr__(self, "entries", tuple(tuple(row) for row in self.entries))
        if len(self.entries) != len(self.texts) or not self.entries:
            raise ValueError("entries must have one row per hypothesis (n >= 1)")
        m = len(self.entries[0])
        if m < 1 or m > len(self.texts):
            raise ValueError("column count must be in [1, n]")
        for row in self.entries:
            if len(row) != m:
                raise ValueError("entries must be rectangular")
            for value in row:
                if not math.isfinite(value):
                    raise ValueError("matrix entries must be finite")
                if self.utility_range is not None and not (
                    self.utility_range[0] <= value <= self.utility_range[1]
                ):
                    raise UtilityRangeError(
                        f"entry {value} outside declared range {self.utility_range}"
                    )

    @property
    def n(self) -> int:
        return len(self.texts)

    @property
    def m(self) -> int:
        return len(self.entries[0])


def compute_utility_matrix(
    source: str,
    hyps: HypothesisSet,
    utility: UtilityFunction | ScorerHandle,
    num_pseudo_refs: int | None = None,
) -> UtilityMatrix:
    """Score every (candidate, pseudo-reference) pair of the set.

    Issues at most n*m scoring calls; duplicate strings are memoized so
    identical hypotheses never cost extra wire traffic. Deterministic
    given a deterministic utility.
    """
    texts = hyps.texts()
    n = len(texts)
    m = n if num_pseudo_refs is None else num_pseudo_refs
    if not 1 <= m <= n:
        raise ValueError(f"num_pseudo_refs must be in [1, {n}]")
    if isinstance(utility, UtilityFunction):
        declared = utility.score_range
        memo: dict[tuple[str, str], float] = {}
        rows = []
        for i in range(n):
            row = []
            for j in range(m):
                key = (texts[i], texts[j])
                score = memo.get(key)
                if score is None:
                    score = utility.score(texts[i], reference=texts[j], source=source)
                    if not declared[0] <= score <= declared[1]:
                        raise UtilityRangeError(
                            f"utility {utility.name!r} returned {score} outside {declared}"
                        )
                    memo[key] = score
                row.append(score)
            rows.append(tuple(row))
        return UtilityMatrix(
            segment_id=hyps.segment_id,
            texts=texts,
            entries=tuple(rows),
            utility_name=utility.name,
            utility_range=declared,
        )
    requests = []
    for i in range(n):
        for j in range(m):
            requests.append(ScoreRequest(id=i * m + j, src=source, mt=texts[i], ref=texts[j]))
    scores = utility.score_batch(requests)
    rows = [tuple(scores[i * m : (i + 1) * m]) for i in range(n)]
    return UtilityMatrix(
        segment_id=hyps.segment_id,
        texts=texts,
        entries=tuple(rows),
        utility_name=utility.name,
        utility_range=None,
    )


def _argmax_lowest(values: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def expected_utilities(matrix: UtilityMatrix, include_self: bool = True) -> list[float]:
    """Per-candidate Monte Carlo estimate: the mean of each row.

    The pseudo-references are the samples themselves, so by default the
    j = i term participates in the mean; ``include_self=False`` drops it
    (ablation knob), dividing by m - 1.
    """
    out = []
    for i, row in enumerate(matrix.entries):
        if include_self or i >= matrix.m:
            total = 0.0
            for value in row:
                total += value
            out.append(total / matrix.m)
        else:
            if matrix.m == 1:
                raise ValueError("cannot exclude the self term with a single pseudo-reference")
            total = 0.0
            for j, value in enumerate(row):
                if j != i:
                    total += value
            out.append(total / (matrix.m - 1))
    return out


def mbr_select(matrix: UtilityMatrix, include_self: bool = True) -> EnsembleSelection:
    """Pick the candidate with the highest expected utility (lowest index wins ties)."""
    utilities = expected_utilities(matrix, include_self=include_self)
    idx = _argmax_lowest(utilities)
    return EnsembleSelection(
        segment_id=matrix.segment_id,
        method="mbr",
        chosen_index=idx,
        chosen_text=matrix.texts[idx],
        score=utilities[idx],
        diagnostics={f"expected_utility_{i}": u for i, u in enumerate(utilities)},
    )


def rank_select(qe_scores: Sequence[float], hyps: HypothesisSet) -> EnsembleSelection:
    """Pick the candidate with the highest reference-free quality score."""
    if len(qe_scores) == 0:
        raise ValueError("qe_scores is empty")
    if len(qe_scores) != len(hyps):
        raise ValueError(f"{len(qe_scores)} scores for {len(hyps)} hypotheses")
    for score in qe_scores:
        if not math.isfinite(score):
            raise ValueError(f"non-finite quality score {score!r}")
    idx = _argmax_lowest(qe_scores)
    return EnsembleSelection(
        segment_id=hyps.segment_id,
        method="rank",
        chosen_index=idx,
        chosen_text=hyps.hypotheses[idx].text,
        score=float(qe_scores[idx]),
        diagnostics={f"qe_score_{i}": float(s) for i, s in enumerate(qe_scores)},
    )


def oracle_select(
    hyps: HypothesisSet,
    reference: str | None,
    source: str,
    metric: UtilityFunction | ScorerHandle,
) -> EnsembleSelection:
    """Pick the candidate closest to the true reference (quality upper bound)."""
    if reference is None:
        raise ValueError(f"segment {hyps.segment_id!r} has no reference; oracle selection needs one")
    texts = hyps.texts()
    if isinstance(metric, UtilityFunction):
        scores = [metric.score(t, reference=reference, source=source) for t in texts]
    else:
        requests = [
            ScoreRequest(id=i, src=source, mt=t, ref=reference) for i, t in enumerate(texts)
        ]
        scores = metric.score_batch(requests)
    idx = _argmax_lowest(scores)
    return EnsembleSelection(
        segment_id=hyps.segment_id,
        method="oracle",
        chosen_index=idx,
        chosen_text=texts[idx],
        score=scores[idx],
        diagnostics={f"metric_score_{i}": s for i, s in enumerate(scores)},
    )


class DiversityReport(NamedTuple):
    value: float
    clamped: int


def diversity_report(matrix: UtilityMatrix) -> DiversityReport:
    """1 minus the mean pairwise utility over ordered pairs i != j.

    Reuses the existing matrix, so it issues zero new scoring calls.
    Entries outside [0, 1] are clamped and counted (external scorers
    occasionally overshoot nominal bounds; boundedness is required for
    the statistic to stay in [0, 1]).
    """
    if matrix.n < 2:
        raise ValueError("diversity needs at least two hypotheses")
    if matrix.m != matrix.n:
        raise ValueError("diversity needs the full square matrix (m == n)")
    total = 0.0
    clamped = 0
    for i, row in enumerate(matrix.entries):
        for j, value in enumerate(row):
            if i == j:
                continue
            if value < 0.0:
                value = 0.0
                clamped += 1
            elif value > 1.0:
                value = 1.0
                clamped += 1
            total += value
    n = matrix.n
    return DiversityReport(1.0 - total / (n * (n - 1)), clamped)


def diversity(matrix: UtilityMatrix) -> float:
    return diversity_report(matrix).value


def dump_matrices(path: str | os.PathLike[str], matrices: Sequence[UtilityMatrix]) -> None:
    """Debug dump, one matrix per line."""
    write_jsonl_atomic(
        path,
        (
            json.dumps(
                {
                    "segment_id": m.segment_id,
                    "utility_name": m.utility_name,
                    "entries": [list(row) for row in m.entries],
                },
                ensure_ascii=False,
            )
            for m in matrices
        ),
    )
