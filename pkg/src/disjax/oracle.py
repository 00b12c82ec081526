"""Yes/no disjointness oracle: prompt rendering, answer parsing, a replayable
transcript cache, and the backends that actually produce answers."""

from __future__ import annotations

import json
import logging
import os
import string
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Protocol

import httpx

from disjax.closure import Label, PairMatrix
from disjax.errors import (
    AmbiguousVerdictError,
    ConfigError,
    OracleProtocolError,
    OracleTransportError,
    ValidationError,
)
from disjax.model import ClassId, KnowledgeBase, label_of

log = logging.getLogger(__name__)

API_KEY_ENV = "DISJAX_API_KEY"


class Strategy(str, Enum):
    NAIVE = "naive"
    TASK = "task"
    FEWSHOT = "fewshot"


class QAMode(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class PromptSpec:
    strategy: Strategy = Strategy.NAIVE
    qa_mode: QAMode = QAMode.POSITIVE

    @classmethod
    def of(cls, strategy: str | Strategy, qa_mode: str | QAMode) -> "PromptSpec":
        try:
            return cls(Strategy(strategy), QAMode(qa_mode))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


PROMPT_GRID = tuple(PromptSpec(s, q) for s in Strategy for q in QAMode)

_TASK_SENTENCE = 'This is a question about ontological disjointness, answer only with "yes" or "no"'

INSTRUCTIONS = {
    Strategy.NAIVE: 'Answer only "yes" or "no".',
    Strategy.TASK: _TASK_SENTENCE,
    Strategy.FEWSHOT: (
        _TASK_SENTENCE + ".\n"
        'Examples of disjoint are: "person" and "file system", "tower" and "person", '
        '"place" and "agent", "continent" and "sea", "baseball league" and "bowling league", '
        '"planet" and "star".\n'
        'Examples of not disjoint are: "basketball player" and "baseball player", '
        '"means of transportation" and "reptile", "garden" and "historic place", '
        '"president" and "beauty queen", "castle" and "prison".'
    ),
}

QUESTIONS = {
    QAMode.POSITIVE: "Is the class {a} disjoint from {b}?",
    QAMode.NEGATIVE: "Can a {a} be a {b}?",
}


def render_prompt(spec: PromptSpec, label_a: str, label_b: str) -> tuple[str, str]:
    """Return ``(instruction, question)`` for one grid cell."""
    for lab in (label_a, label_b):
        if not isinstance(lab, str) or not lab.strip():
            raise ValidationError("class labels must be non-empty")
    return INSTRUCTIONS[spec.strategy], QUESTIONS[spec.qa_mode].format(a=label_a, b=label_b)


def format_prompt(spec: PromptSpec, label_a: str, label_b: str) -> str:
    instruction, question = render_prompt(spec, label_a, label_b)
    return f"{instruction}\n\n{question}\n"


_STRIP = string.punctuation + string.whitespace + "“”‘’«»"


def parse_verdict(raw: str, qa_mode: QAMode) -> Label | None:
    """Map a raw model answer to DISJOINT / NOT_DISJOINT, or None if it is
    neither a yes nor a no."""
    text = raw.strip().lower().strip(_STRIP)
    if not text:
        return None
    token = text.split()[0].strip(_STRIP)
    if token == "yes":
        said_yes = True
    elif token == "no":
        said_yes = False
    else:
        return None
    # positive mode asks "disjoint?", negative mode asks "can overlap?"
    if (qa_mode == QAMode.POSITIVE) == said_yes:
        return Label.DISJOINT
    return Label.NOT_DISJOINT


def answer_for(value: Label, qa_mode: QAMode) -> str:
    """The raw yes/no a perfectly obedient model would give for ``value``."""
    disjoint = value == Label.DISJOINT
    return "yes" if disjoint == (qa_mode == QAMode.POSITIVE) else "no"


class Term(NamedTuple):
    iri: str
    label: str


def term(kb: KnowledgeBase, c: ClassId) -> Term:
    return Term(kb.iri(c), label_of(kb, c))


@dataclass
class Verdict:
    value: Label
    raw_response: str
    ambiguous_retries: int = 0
    fallback: bool = False
    cached: bool = False


@dataclass
class OracleConfig:
    endpoint_url: str = "http://localhost:8000/v1"
    model_name: str = ""
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 60.0
    cache_path: str | None = None
    ambiguous_fallback: str = "not_disjoint"
    instruction_mode: str = "system"

    def __post_init__(self):
        if self.ambiguous_fallback not in ("not_disjoint", "error"):
            raise ConfigError(f"ambiguous_fallback must be not_disjoint or error, got {self.ambiguous_fallback!r}")
        if self.instruction_mode not in ("system", "inline"):
            raise ConfigError(f"instruction_mode must be system or inline, got {self.instruction_mode!r}")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


class Backend(Protocol):
    def ask(self, spec: PromptSpec, a: Term, b: Term) -> str: ...


class ChatCompletionBackend:
    """POSTs to ``<endpoint_url>/chat/completions`` and returns the first
    choice's message content."""

    def __init__(self, config: OracleConfig, client: httpx.Client | None = None):
        self.config = config
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=config.timeout)
        self.headers = headers
        self.url = config.endpoint_url.rstrip("/") + "/chat/completions"

    def request_body(self, spec: PromptSpec, a: Term, b: Term) -> dict:
        instruction, question = render_prompt(spec, a.label, b.label)
        if self.config.instruction_mode == "system":
            messages = [
                {"role": "system", "content": instruction},
                {"role": "user", "content": question},
            ]
        else:
            messages = [{"role": "user", "content": f"{instruction}\n{question}"}]
        return {"model": self.config.model_name, "temperature": self.config.temperature, "messages": messages}

    def ask(self, spec: PromptSpec, a: Term, b: Term) -> str:
        body = self.request_body(spec, a, b)
        try:
            resp = self.client.post(self.url, json=body, headers=self.headers, timeout=self.config.timeout)
        except httpx.TransportError as exc:
            raise OracleTransportError(f"{type(exc).__name__}: {exc}", (a.label, b.label)) from exc
        if not resp.is_success:
            raise OracleProtocolError(resp.status_code, resp.text)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise OracleProtocolError(resp.status_code, "malformed completion: " + resp.text) from None
        return content if isinstance(content, str) else ""


class GoldMock:
    """Answers with the gold label of the queried pair, as a yes/no string.

    Pairs are looked up by IRI, falling back to the label text, in either order.
    """

    def __init__(self, gold: dict[frozenset[str], Label], default: Label = Label.NOT_DISJOINT):
        self.gold = gold
        self.default = default
        self.calls = 0

    def lookup(self, a: Term, b: Term) -> Label:
        for key in (frozenset((a.iri, b.iri)), frozenset((a.label, b.label))):
            if key in self.gold:
                return self.gold[key]
        return self.default

    def ask(self, spec: PromptSpec, a: Term, b: Term) -> str:
        self.calls += 1
        return answer_for(self.lookup(a, b), spec.qa_mode)


def mock_from_gold(path_or_matrix, default: Label = Label.NOT_DISJOINT) -> GoldMock:
    """Build a GoldMock from a pair-matrix TSV (or an in-memory matrix).
    Unknown and conflict rows are not used as answers."""
    m = path_or_matrix if isinstance(path_or_matrix, PairMatrix) else PairMatrix.read_tsv(path_or_matrix)
    gold = {}
    for (ia, ib), lab in m.label_map().items():
        if lab in (Label.DISJOINT, Label.NOT_DISJOINT):
            gold[frozenset((ia, ib))] = lab
    return GoldMock(gold, default)


class TranscriptCache:
    """Append-only JSON-lines transcript keyed by (strategy, qa_mode, label_a, label_b)."""

    FIELDS = ("strategy", "qa_mode", "label_a", "label_b", "raw_response", "verdict", "timestamp")

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.records: dict[tuple[str, str, str, str], dict] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    @staticmethod
    def key(spec: PromptSpec, label_a: str, label_b: str) -> tuple[str, str, str, str]:
        return (spec.strategy.value, spec.qa_mode.value, label_a, label_b)

    def _load(self) -> None:
        with open(self.path, "rb") as fh:
            data = fh.read()
        good = 0
        for line in data.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                break  # torn final write
            try:
                rec = json.loads(line)
            except ValueError:
                break
            self.records[(rec["strategy"], rec["qa_mode"], rec["label_a"], rec["label_b"])] = rec
            good += len(line)
        if good < len(data):
            log.warning("truncating torn tail of transcript %s", self.path)
            with open(self.path, "r+b") as fh:
                fh.truncate(good)

    def get(self, spec: PromptSpec, label_a: str, label_b: str) -> dict | None:
        return self.records.get(self.key(spec, label_a, label_b))

    def append(self, record: dict) -> None:
        k = (record["strategy"], record["qa_mode"], record["label_a"], record["label_b"])
        line = json.dumps(record, ensure_ascii=False, separators=(", ", ": ")) + "\n"
        with self._lock:
            self.records[k] = record
            if self.path is None:
                return
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())

    def __len__(self) -> int:
        return len(self.records)


class Oracle:
    """Cache-first querying with ambiguity retries and a fallback policy."""

    def __init__(
        self,
        backend: Backend,
        cache: TranscriptCache | None = None,
        max_retries: int = 2,
        ambiguous_fallback: str = "not_disjoint",
    ):
        self.backend = backend
        self.cache = cache if cache is not None else TranscriptCache()
        self.max_retries = max_retries
        self.ambiguous_fallback = ambiguous_fallback
        self.round_trips = 0

    @classmethod
    def from_config(cls, config: OracleConfig, backend: Backend | None = None) -> "Oracle":
        return cls(
            backend or ChatCompletionBackend(config),
            TranscriptCache(config.cache_path),
            max_retries=config.max_retries,
            ambiguous_fallback=config.ambiguous_fallback,
        )

    def _ask(self, spec: PromptSpec, a: Term, b: Term) -> str:
        for attempt in range(self.max_retries + 1):
            try:
                self.round_trips += 1
                return self.backend.ask(spec, a, b)
            except OracleTransportError as exc:
                log.warning("transport error on attempt %d for (%s, %s): %s", attempt + 1, a.label, b.label, exc)
                if attempt == self.max_retries:
                    raise
        raise AssertionError("unreachable")

    def query(self, spec: PromptSpec, a: Term, b: Term) -> Verdict:
        hit = self.cache.get(spec, a.label, b.label)
        if hit is not None:
            return Verdict(
                Label.from_token(hit["verdict"]),
                hit["raw_response"],
                hit.get("ambiguous_retries", 0),
                hit.get("fallback", False),
                cached=True,
            )
        retries = 0
        raw = self._ask(spec, a, b)
        value = parse_verdict(raw, spec.qa_mode)
        while value is None and retries < self.max_retries:
            retries += 1
            log.info("ambiguous answer %r for (%s, %s); re-asking", raw[:60], a.label, b.label)
            raw = self._ask(spec, a, b)
            value = parse_verdict(raw, spec.qa_mode)
        fallback = False
        if value is None:
            if self.ambiguous_fallback == "error":
                raise AmbiguousVerdictError(raw, (a.label, b.label))
            value, fallback = Label.NOT_DISJOINT, True
        record = {
            "strategy": spec.strategy.value,
            "qa_mode": spec.qa_mode.value,
            "label_a": a.label,
            "label_b": b.label,
            "raw_response": raw,
            "verdict": value.token,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "ambiguous_retries": retries,
            "fallback": fallback,
        }
        self.cache.append(record)
        return Verdict(value, raw, retries, fallback)

    __call__ = query


def query(oracle: Oracle, spec: PromptSpec, a: Term, b: Term) -> Verdict:
    return oracle.query(spec, a, b)
