"""Prompt templates for translation and self-selection.

Six translation templates plus the multiple-choice selection prompt and
the free-form combination prompt. Rendered text is byte-stable: golden
tests pin every template, so any wording change is a deliberate,
visible diff. Few-shot examples are supported only for templates that
end in a completion cue; each shot is a completed instance of the same
template, instances separated by a blank line.
"""

from __future__ import annotations

from typing import Sequence

TRANSLATION_TEMPLATES = ("hendy", "peng", "gao", "zhang", "multi_n", "llama_variant")
ALL_TEMPLATES = TRANSLATION_TEMPLATES + ("choose_best", "generate_best")

MAX_CHOICE_OPTIONS = 26


class PromptError(ValueError):
    """Template cannot be rendered with the given arguments."""


class AnswerParseError(ValueError):
    """No usable option letter in a selection completion."""


def _render_translation(template_id: str, src_lang: str, tgt_lang: str, source: str, n: int | None) -> str:
    if template_id == "hendy":
        return f"Translate this sentence from {src_lang} to {tgt_lang}.\nSource: {source}\nTarget:"
    if template_id == "peng":
        return f"Please provide the {tgt_lang} translation for this sentence: {source}"
    if template_id == "gao":
        return (
            f"This is a {src_lang} to {tgt_lang} translation task, "
            f"please provide the {tgt_lang} translation for this sentence: {source}"
        )
    if template_id == "zhang":
        return f"{src_lang}: {source}\n{tgt_lang}:"
    if template_id == "multi_n":
        if n is None:
            raise PromptError("template 'multi_n' needs n (the number of translations to ask for)")
        return (
            f"Translate this sentence from {src_lang} to {tgt_lang} in {n} different ways.\n"
            f"Source: {source}\n{n} translations:"
        )
    if template_id == "llama_variant":
        return (
            f"Translate this sentence from {src_lang} to {tgt_lang}.\n"
            f"{src_lang} Source: {source}\n{tgt_lang} Translation:"
        )
    raise PromptError(f"unknown translation template {template_id!r}")


# Templates whose rendered form ends in a cue ("Target:", "Translation:",
# "{lang}:") can host completed in-context examples; the others have no
# defined shot layout.
_SHOT_TEMPLATES = frozenset({"hendy", "zhang", "llama_variant"})


def build_translation_prompt(
    template_id: str,
    src_lang_name: str,
    tgt_lang_name: str,
    source: str,
    shots: Sequence[tuple[str, str]] = (),
    n: int | None = None,
) -> str:
    """Render a translation prompt, optionally preceded by few-shot examples."""
    if template_id not in TRANSLATION_TEMPLATES:
        raise PromptError(f"{template_id!r} is not a translation template")
    if shots and template_id not in _SHOT_TEMPLATES:
        raise PromptError(f"template {template_id!r} has no defined few-shot layout")
    pieces = []
    for shot_source, shot_translation in shots:
        rendered = _render_translation(template_id, src_lang_name, tgt_lang_name, shot_source, n)
        pieces.append(rendered + " " + shot_translation)
    pieces.append(_render_translation(template_id, src_lang_name, tgt_lang_name, source, n))
    return "\n\n".join(pieces)


def option_letter(index: int) -> str:
    if not 0 <= index < MAX_CHOICE_OPTIONS:
        raise PromptError(f"option index {index} outside A..Z")
    return chr(ord("A") + index)


def build_choosebest_prompt(
    src_lang_name: str,
    tgt_lang_name: str,
    source: str,
    hyps: Sequence[str],
) -> str:
    """Render the multiple-choice selection prompt (options A..Z, ends 'Correct answer: Option')."""
    if not 2 <= len(hyps) <= MAX_CHOICE_OPTIONS:
        raise PromptError(f"choose_best needs between 2 and {MAX_CHOICE_OPTIONS} hypotheses, got {len(hyps)}")
    lines = [
        "This is a multiple choice question, choose a single answer. "
        f"What is the best {tgt_lang_name} translation for this {src_lang_name} sentence?",
        f"Source: {source}",
    ]
    for i, hyp in enumerate(hyps):
        lines.append(f"Option {option_letter(i)}. {hyp}")
    lines.append("Correct answer: Option")
    return "\n".join(lines)


def build_generatebest_prompt(
    src_lang_name: str,
    tgt_lang_name: str,
    source: str,
    hyps: Sequence[str],
) -> str:
    """Render the free-form combination prompt (model may copy or compose)."""
    if not hyps:
        raise PromptError("generate_best needs at least one hypothesis")
    lines = [
        "Use the following translation hypotheses to generate the best possible "
        f"{tgt_lang_name} translation for this {src_lang_name} sentence.",
        f"Source: {source}",
        "Translation hypotheses:",
    ]
    lines.extend(hyps)
    lines.append("Best possible translation:")
    return "\n".join(lines)


def parse_choosebest_answer(completion: str, n_options: int) -> int:
    """Extract the zero-based option index from a selection completion.

    Scans for the first standalone uppercase letter (optionally preceded
    by "Option"). Lowercase letters are not accepted: a bare "a" is an
    English article far more often than an answer.
    """
    if n_options < 2:
        raise ValueError("n_options must be >= 2")
    for pos, ch in enumerate(completion):
        if not "A" <= ch <= "Z":
            continue
        before = completion[pos - 1] if pos > 0 else ""
        after = completion[pos + 1] if pos + 1 < len(completion) else ""
        if before.isalpha() or after.isalpha():
            continue
        index = ord(ch) - ord("A")
        if index >= n_options:
            raise AnswerParseError(
                f"option {ch!r} is out of range for {n_options} options: {completion[:80]!r}"
            )
        return index
    raise AnswerParseError(f"no option letter found in completion: {completion[:80]!r}")
