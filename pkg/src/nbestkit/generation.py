"""Hypothesis generation against a pluggable completion backend.

The backend wire shape mirrors hosted-LLM completion APIs:
POST {prompt, n, temperature, top_p, max_tokens, stop} ->
{choices: [{text, completion_tokens}, ...], prompt_tokens}. A
deterministic offline stub ships for tests and desk-scale runs. Token
accounting follows the generation cost model: one batched call pays for
its prompt once, so sampling n completions costs far less than n
single-sample calls.
"""

from __future__ import annotations

import hashlib
import random
import threading
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import requests

from nbestkit.corpus import Hypothesis, HypothesisSet

SAMPLING_MODES = ("greedy", "unbiased", "biased", "custom")

GREEDY_PROXY_TEMPERATURE = 0.1
UNBIASED_TEMPERATURE = 1.0
BIASED_TEMPERATURE = 0.8
BIASED_TOP_P = 0.95
DEFAULT_MAX_TOKENS = 256
N_PRESETS = (5, 20, 50)
# Beam width convention for backends that decode with beam search; the
# toolkit itself never implements search.
DEFAULT_BEAM_SIZE = 5


class BackendError(RuntimeError):
    """Completion backend failed or returned a malformed response."""


class IncompleteCompletionsError(BackendError):
    """Backend returned fewer completions than requested.

    The partial results are attached as ``partial`` (tokens were still
    paid for, and the ledger records them).
    """

    def __init__(self, message: str, partial: HypothesisSet | None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling parameters plus a mode tag with pinned conventions.

    greedy: the low-temperature single-sample proxy (t <= 0.1, n = 1);
    unbiased: plain ancestral sampling (t = 1.0, top_p = 1.0);
    biased: temperature + nucleus sampling (t = 0.8, top_p = 0.95).
    """

    temperature: float
    top_p: float
    n: int
    max_tokens: int = DEFAULT_MAX_TOKENS
    mode: str = "custom"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.mode not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.mode == "greedy" and not (self.temperature <= GREEDY_PROXY_TEMPERATURE and self.n == 1):
            raise ValueError("greedy mode requires temperature <= 0.1 and n = 1")
        if self.mode == "unbiased" and not (
            self.temperature == UNBIASED_TEMPERATURE and self.top_p == 1.0
        ):
            raise ValueError("unbiased mode requires temperature = 1.0 and top_p = 1.0")
        if self.mode == "biased" and not (
            self.temperature == BIASED_TEMPERATURE and self.top_p == BIASED_TOP_P
        ):
            raise ValueError("biased mode requires temperature = 0.8 and top_p = 0.95")

    @classmethod
    def greedy(cls, temperature: float = GREEDY_PROXY_TEMPERATURE, max_tokens: int = DEFAULT_MAX_TOKENS):
        # Temperature 0 is passed through verbatim when the backend accepts
        # it; 0.1 is the default proxy for backends known to reject 0.
        return cls(temperature=temperature, top_p=1.0, n=1, max_tokens=max_tokens, mode="greedy")

    @classmethod
    def unbiased(cls, n: int, max_tokens: int = DEFAULT_MAX_TOKENS):
        return cls(temperature=UNBIASED_TEMPERATURE, top_p=1.0, n=n, max_tokens=max_tokens, mode="unbiased")

    @classmethod
    def biased(cls, n: int, max_tokens: int = DEFAULT_MAX_TOKENS):
        return cls(temperature=BIASED_TEMPERATURE, top_p=BIASED_TOP_P, n=n, max_tokens=max_tokens, mode="biased")


def infer_mode(temperature: float, top_p: float, n: int) -> str:
    if temperature <= GREEDY_PROXY_TEMPERATURE and n == 1:
        return "greedy"
    if temperature == UNBIASED_TEMPERATURE and top_p == 1.0:
        return "unbiased"
    if temperature == BIASED_TEMPERATURE and top_p == BIASED_TOP_P:
        return "biased"
    return "custom"


@dataclass(frozen=True)
class CompletionChoice:
    text: str
    completion_tokens: int


@dataclass(frozen=True)
class CompletionResult:
    choices: tuple[CompletionChoice, ...]
    prompt_tokens: int


class CompletionBackend(Protocol):
    def complete(
        self,
        prompt: str,
        *,
        n: int,
        temperature: float,
        top_p: float,
        max_tokens: int,
        stop: Sequence[str] | None = None,
    ) -> CompletionResult: ...


@dataclass(frozen=True)
class CostRecord:
    segment_id: str
    purpose: str
    prompt_tokens: int
    completion_tokens: int

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")


class CostLedger:
    """Append-only per-call token accounting.

    Totals are permutation-invariant and additive across merges, so
    ledgers can be kept per segment and merged in any order.
    """

    def __init__(self, records: Sequence[CostRecord] = ()):
        self._records = list(records)
        self._lock = threading.Lock()

    def append(self, record: CostRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> tuple[CostRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def total_tokens(self) -> int:
        return sum(r.prompt_tokens + r.completion_tokens for r in self.records)

    def merged(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(self.records + other.records)

    def __len__(self) -> int:
        return len(self.records)


def relative_cost(ledger: CostLedger, baseline: CostLedger) -> float:
    """Total tokens relative to a baseline ledger (reports round to the nearest unit)."""
    base = baseline.total_tokens()
    if base <= 0:
        raise ValueError("baseline ledger has no tokens")
    return ledger.total_tokens() / base


def sample_hypotheses(
    backend: CompletionBackend,
    prompt: str,
    cfg: SamplingConfig,
    ledger: CostLedger,
    segment_id: str = "",
    template_id: str = "",
    purpose: str = "generate",
) -> HypothesisSet:
    """Issue one batched completion call and record it in the ledger.

    The ledger gets exactly one record: the prompt is paid for once for
    the whole batch, completions sum over all returned choices. A short
    batch raises IncompleteCompletionsError with the partial set
    attached (its tokens are still recorded).
    """
    result = backend.complete(
        prompt,
        n=cfg.n,
        temperature=cfg.temperature,
        top_p=cfg.top_p,
        max_tokens=cfg.max_tokens,
    )
    hypotheses = tuple(
        Hypothesis(
            text=choice.text,
            template_id=template_id,
            temperature=cfg.temperature,
            top_p=cfg.top_p,
            prompt_tokens=result.prompt_tokens,
            completion_tokens=choice.completion_tokens,
        )
        for choice in result.choices
    )
    if hypotheses:
        ledger.append(
            CostRecord(
                segment_id=segment_id,
                purpose=purpose,
                prompt_tokens=result.prompt_tokens,
                completion_tokens=sum(c.completion_tokens for c in result.choices),
            )
        )
    if len(hypotheses) < cfg.n:
        partial = (
            HypothesisSet(segment_id=segment_id or "unknown", hypotheses=hypotheses)
            if hypotheses
            else None
        )
        raise IncompleteCompletionsError(
            f"backend returned {len(hypotheses)} of {cfg.n} completions",
            partial=partial,
        )
    return HypothesisSet(segment_id=segment_id or "unknown", hypotheses=hypotheses)


class HTTPCompletionBackend:
    """JSON-over-HTTP completion client with bounded exponential backoff."""

    def __init__(self, url: str, timeout: float = 60.0, max_retries: int = 3):
        self.url = url
        self.timeout = timeout
        self.max_retries = max_retries
        self._session = requests.Session()

    def complete(self, prompt, *, n, temperature, top_p, max_tokens, stop=None) -> CompletionResult:
        payload = {
            "prompt": prompt,
            "n": n,
            "temperature": temperature,
            "top_p": top_p,
            "max_tokens": max_tokens,
            "stop": list(stop) if stop else None,
        }
        delay = 0.5
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                response = self._session.post(self.url, json=payload, timeout=self.timeout)
                if response.status_code >= 500:
                    raise BackendError(f"backend returned HTTP {response.status_code}")
                response.raise_for_status()
                return self._parse(response.json())
            except (requests.RequestException, BackendError) as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    time.sleep(delay)
                    delay *= 2
        raise BackendError(f"completion request failed after {self.max_retries} attempts: {last_error}")

    @staticmethod
    def _parse(body) -> CompletionResult:
        try:
            choices = tuple(
                CompletionChoice(text=c["text"], completion_tokens=int(c["completion_tokens"]))
                for c in body["choices"]
            )
            return CompletionResult(choices=choices, prompt_tokens=int(body["prompt_tokens"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc


_NOISE_VOCAB = ("blim", "vort", "snee", "plon", "krad", "welp", "dron", "quov")


def extract_prompt_source(prompt: str) -> str:
    """Recover the source sentence from any of the shipped prompt shapes."""
    source_line = None
    for line in prompt.split("\n"):
        marker = line.find("Source: ")
        if marker != -1:
            source_line = line[marker + len("Source: ") :]
    if source_line is not None:
        return source_line
    marker = prompt.rfind("sentence: ")
    if marker != -1:
        return prompt[marker + len("sentence: ") :].split("\n")[0]
    first = prompt.split("\n", 1)[0]
    sep = first.find(": ")
    if sep != -1:
        return first[sep + 2 :]
    return prompt.strip()


class StubCompletionBackend:
    """Deterministic offline backend: noisy copies of the prompt's source.

    The clean output for a translation prompt is the source sentence
    itself (so tests can plant reference = source). Each sampled copy
    corrupts words independently with probability
    noise * max(0, temperature - 0.1): higher temperatures yield more
    diverse, lower-quality hypotheses; the greedy proxy is exactly
    clean. Selection prompts are answered self-consistently (the option
    closest to the clean output, by character overlap).
    """

    def __init__(
        self,
        seed: int = 0,
        noise: float = 0.35,
        fixed_prompt_tokens: int | None = None,
        fixed_completion_tokens: int | None = None,
    ):
        self.seed = seed
        self.noise = noise
        self.fixed_prompt_tokens = fixed_prompt_tokens
        self.fixed_completion_tokens = fixed_completion_tokens

    def _rng(self, prompt: str, temperature: float, top_p: float, index: int) -> random.Random:
        material = f"{self.seed}|{temperature}|{top_p}|{index}|{prompt}".encode("utf-8")
        return random.Random(int.from_bytes(hashlib.sha256(material).digest()[:8], "big"))

    def _corrupt(self, text: str, rng: random.Random, probability: float) -> str:
        out: list[str] = []
        for word in text.split():
            if rng.random() >= probability:
                out.append(word)
                continue
            op = rng.randrange(4)
            if op == 0:
                continue  # drop
            if op == 1:
                out.append(word)
                out.append(word)
            elif op == 2 and len(word) >= 2:
                k = rng.randrange(len(word) - 1)
                out.append(word[:k] + word[k + 1] + word[k] + word[k + 2 :])
            else:
                out.append(rng.choice(_NOISE_VOCAB))
        if not out:
            out.append(rng.choice(_NOISE_VOCAB))
        return " ".join(out)

    def complete(self, prompt, *, n, temperature, top_p, max_tokens, stop=None) -> CompletionResult:
        stripped = prompt.rstrip()
        clean = extract_prompt_source(prompt)
        choices = []
        for index in range(n):
            rng = self._rng(prompt, temperature, top_p, index)
            if stripped.endswith("Correct answer: Option"):
                text = " " + self._pick_option(prompt, clean) + "."
            elif stripped.endswith("Best possible translation:"):
                text = " " + clean
            else:
                probability = self.noise * max(0.0, temperature - GREEDY_PROXY_TEMPERATURE)
                text = self._corrupt(clean, rng, probability)
                text = " ".join(text.split()[:max_tokens])
            tokens = self.fixed_completion_tokens
            if tokens is None:
                tokens = len(text.split())
            choices.append(CompletionChoice(text=text, completion_tokens=tokens))
        prompt_tokens = self.fixed_prompt_tokens
        if prompt_tokens is None:
            prompt_tokens = len(prompt.split())
        return CompletionResult(choices=tuple(choices), prompt_tokens=prompt_tokens)

    @staticmethod
    def _pick_option(prompt: str, clean: str) -> str:
        from nbestkit.metrics import chrf

        best_letter = "A"
        best_score = -1.0
        for line in prompt.split("\n"):
            if len(line) > 9 and line.startswith("Option ") and line[8:10] == ". ":
                letter, text = line[7], line[10:]
                score = chrf(text, clean)
                if score > best_score:
                    best_score = score
                    best_letter = letter
        return best_letter
