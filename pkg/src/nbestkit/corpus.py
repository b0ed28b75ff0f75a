"""Domain types and line-oriented JSON corpus I/O.

One JSON object per "\\n"-terminated line, UTF-8 throughout. Loaders
reject the whole file on the first malformed line (silently skipping
lines would corrupt every rate computed downstream) and report the
1-based line number. Writers stage to a temp file in the destination
directory and rename atomically, so a failed write never leaves a
partial file at the final path. Unknown JSON fields are ignored on
read. Text is kept exactly as found; normalization is a metric-level
concern.
"""

from __future__ import annotations

import contextlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

SELECTION_METHODS = frozenset(
    {"greedy", "sample", "mbr", "rank", "oracle", "choose_best", "generate_best"}
)


class CorpusError(ValueError):
    """Malformed corpus file; carries the path and 1-based line number."""

    def __init__(self, message: str, path: str | os.PathLike[str] | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class SourceSegment:
    """One source sentence with its language pair and optional reference."""

    id: str
    src_lang: str
    tgt_lang: str
    text: str
    reference: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("segment id must be non-empty")
        if not self.src_lang or not self.tgt_lang:
            raise ValueError("language codes must be non-empty")
        if self.src_lang == self.tgt_lang:
            raise ValueError(f"src_lang and tgt_lang are both {self.src_lang!r}")
        if not self.text.strip():
            raise ValueError("segment text is empty")


@dataclass(frozen=True)
class Hypothesis:
    """One candidate translation with the sampling metadata that produced it.

    temperature/top_p are recorded exactly as requested from the backend;
    token counts are the backend-reported per-call actuals.
    """

    text: str
    template_id: str = ""
    temperature: float = 0.0
    top_p: float = 1.0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")


@dataclass(frozen=True)
class HypothesisSet:
    """N >= 1 candidates for one segment, in generation order.

    Order is load-bearing: index i always denotes the same string across
    every module boundary, and duplicates are permitted (samples repeat).
    """

    segment_id: str
    hypotheses: tuple[Hypothesis, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if not self.segment_id:
            raise ValueError("segment_id must be non-empty")
        if len(self.hypotheses) < 1:
            raise ValueError("a hypothesis set needs at least one hypothesis")

    def __len__(self) -> int:
        return len(self.hypotheses)

    def texts(self) -> tuple[str, ...]:
        return tuple(h.text for h in self.hypotheses)


@dataclass(frozen=True)
class EnsembleSelection:
    """The chosen output for one segment plus score diagnostics.

    chosen_index is absent for methods that may emit novel text
    (generate_best); when present, chosen_text is the hypothesis at that
    index verbatim.
    """

    segment_id: str
    method: str
    chosen_text: str
    chosen_index: int | None = None
    score: float | None = None
    diagnostics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.method not in SELECTION_METHODS:
            raise ValueError(f"unknown selection method {self.method!r}")
        if self.chosen_index is not None and self.chosen_index < 0:
            raise ValueError("chosen_index must be >= 0")
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))


def _parse_line(raw: str, path: str | os.PathLike[str], lineno: int) -> dict[str, Any]:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed JSON ({exc.msg})", path, lineno) from exc
    if not isinstance(obj, dict):
        raise CorpusError("line is not a JSON object", path, lineno)
    return obj


def _require(obj: dict[str, Any], key: str, kind: type, path: str | os.PathLike[str], lineno: int) -> Any:
    if key not in obj:
        raise CorpusError(f"missing required field {key!r}", path, lineno)
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        raise CorpusError(f"field {key!r} must be {kind.__name__}", path, lineno)
    return value


def _iter_lines(path: str | os.PathLike[str]) -> Iterator[tuple[int, str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            yield lineno, raw.rstrip("\n")


def load_segments(path: str | os.PathLike[str]) -> list[SourceSegment]:
    """Load a source corpus, rejecting the whole file on any bad line."""
    segments: list[SourceSegment] = []
    seen: dict[str, int] = {}
    for lineno, raw in _iter_lines(path):
        obj = _parse_line(raw, path, lineno)
        seg_id = _require(obj, "id", str, path, lineno)
        if seg_id in seen:
            raise CorpusError(
                f"duplicate segment id {seg_id!r} (first seen at line {seen[seg_id]})",
                path,
                lineno,
            )
        seen[seg_id] = lineno
        reference = obj.get("reference")
        if reference is not None and not isinstance(reference, str):
            raise CorpusError("field 'reference' must be str", path, lineno)
        try:
            segment = SourceSegment(
                id=seg_id,
                src_lang=_require(obj, "src_lang", str, path, lineno),
                tgt_lang=_require(obj, "tgt_lang", str, path, lineno),
                text=_require(obj, "text", str, path, lineno),
                reference=reference,
            )
        except ValueError as exc:
            raise CorpusError(str(exc), path, lineno) from exc
        segments.append(segment)
    return segments


def load_hypothesis_sets(path: str | os.PathLike[str]) -> list[HypothesisSet]:
    """Load hypothesis sets, preserving within-set order exactly."""
    sets: list[HypothesisSet] = []
    for lineno, raw in _iter_lines(path):
        obj = _parse_line(raw, path, lineno)
        segment_id = _require(obj, "segment_id", str, path, lineno)
        hyps_raw = obj.get("hypotheses")
        if not isinstance(hyps_raw, list) or not hyps_raw:
            raise CorpusError("field 'hypotheses' must be a non-empty array", path, lineno)
        hypotheses = []
        for entry in hyps_raw:
            if not isinstance(entry, dict):
                raise CorpusError("hypothesis entries must be JSON objects", path, lineno)
            try:
                hypotheses.append(
                    Hypothesis(
                        text=_require(entry, "text", str, path, lineno),
                        template_id=entry.get("template_id", ""),
                        temperature=float(entry.get("temperature", 0.0)),
                        top_p=float(entry.get("top_p", 1.0)),
                        prompt_tokens=int(entry.get("prompt_tokens", 0)),
                        completion_tokens=int(entry.get("completion_tokens", 0)),
                    )
                )
            except (TypeError, ValueError) as exc:
                if isinstance(exc, CorpusError):
                    raise
                raise CorpusError(f"bad hypothesis entry: {exc}", path, lineno) from exc
        sets.append(HypothesisSet(segment_id=segment_id, hypotheses=tuple(hypotheses)))
    return sets


def load_selections(path: str | os.PathLike[str]) -> list[EnsembleSelection]:
    """Load selections written by write_selections."""
    selections: list[EnsembleSelection] = []
    for lineno, raw in _iter_lines(path):
        obj = _parse_line(raw, path, lineno)
        diagnostics = obj.get("diagnostics", {})
        if not isinstance(diagnostics, dict):
            raise CorpusError("field 'diagnostics' must be an object", path, lineno)
        try:
            selections.append(
                EnsembleSelection(
                    segment_id=_require(obj, "segment_id", str, path, lineno),
                    method=_require(obj, "method", str, path, lineno),
                    chosen_text=_require(obj, "chosen_text", str, path, lineno),
                    chosen_index=obj.get("chosen_index"),
                    score=obj.get("score"),
                    diagnostics={str(k): float(v) for k, v in diagnostics.items()},
                )
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, CorpusError):
                raise
            raise CorpusError(f"bad selection entry: {exc}", path, lineno) from exc
    return selections


def segment_to_dict(segment: SourceSegment) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": segment.id,
        "src_lang": segment.src_lang,
        "tgt_lang": segment.tgt_lang,
        "text": segment.text,
    }
    if segment.reference is not None:
        out["reference"] = segment.reference
    return out


def hypothesis_set_to_dict(hyp_set: HypothesisSet) -> dict[str, Any]:
    return {
        "segment_id": hyp_set.segment_id,
        "hypotheses": [
            {
                "text": h.text,
                "template_id": h.template_id,
                "temperature": h.temperature,
                "top_p": h.top_p,
                "prompt_tokens": h.prompt_tokens,
                "completion_tokens": h.completion_tokens,
            }
            for h in hyp_set.hypotheses
        ],
    }


def selection_to_dict(selection: EnsembleSelection) -> dict[str, Any]:
    # Field order is part of the file contract.
    out: dict[str, Any] = {"segment_id": selection.segment_id, "method": selection.method}
    if selection.chosen_index is not None:
        out["chosen_index"] = selection.chosen_index
    out["chosen_text"] = selection.chosen_text
    if selection.score is not None:
        out["score"] = selection.score
    out["diagnostics"] = dict(sorted(selection.diagnostics.items()))
    return out


def write_jsonl_atomic(path: str | os.PathLike[str], lines: Iterable[str]) -> None:
    """Write lines + "\\n" to a temp file, fsync, then rename over path.

    If producing or writing any line fails, the temp file is removed and
    the destination is left untouched (absent if it did not exist).
    """
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    fd, tmp_name = tempfile.mkstemp(dir=directory, prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp_name)
        raise


def _dump(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False)


def write_segments(path: str | os.PathLike[str], segments: Sequence[SourceSegment]) -> None:
    write_jsonl_atomic(path, (_dump(segment_to_dict(s)) for s in segments))


def write_hypothesis_sets(path: str | os.PathLike[str], sets: Sequence[HypothesisSet]) -> None:
    write_jsonl_atomic(path, (_dump(hypothesis_set_to_dict(s)) for s in sets))


def write_selections(path: str | os.PathLike[str], selections: Sequence[EnsembleSelection]) -> None:
    write_jsonl_atomic(path, (_dump(selection_to_dict(s)) for s in selections))
