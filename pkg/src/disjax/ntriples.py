"""Streaming N-Triples ingestion into a KnowledgeBase.

Only the triples relevant to taxonomic disjointness reasoning are kept:
subclass edges, disjointness assertions, class declarations, instance typings
and labels. Everything else is counted and dropped.
"""

from __future__ import annotations

import io
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, NamedTuple, TextIO, Union

from disjax.errors import ParseError, ValidationError
from disjax.model import RDFS_LABEL, SKOS_PREF_LABEL, KnowledgeBase, validate_iri

log = logging.getLogger(__name__)

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_SUBCLASS_OF = "http://www.w3.org/2000/01/rdf-schema#subClassOf"
OWL_DISJOINT_WITH = "http://www.w3.org/2002/07/owl#disjointWith"
OWL_CLASS = "http://www.w3.org/2002/07/owl#Class"


@dataclass(frozen=True)
class VocabularyMap:
    subclass_pred: str = RDFS_SUBCLASS_OF
    disjoint_pred: str = OWL_DISJOINT_WITH
    type_pred: str = RDF_TYPE
    label_preds: frozenset[str] = frozenset({RDFS_LABEL, SKOS_PREF_LABEL})
    class_marker: str = OWL_CLASS


class IRI(str):
    __slots__ = ()


class BNode(str):
    __slots__ = ()


class Literal(NamedTuple):
    lexical: str
    lang: str | None = None
    datatype: str | None = None


Term = Union[IRI, BNode, Literal]


class Triple(NamedTuple):
    subject: IRI | BNode
    predicate: IRI
    object: Term


_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_BNODE_LABEL = re.compile(r"[A-Za-z0-9_À-￿](?:[A-Za-z0-9_.\-·À-￿]*[A-Za-z0-9_\-·À-￿])?")
_LANGTAG = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*")
_IRI_FORBIDDEN = set('<>"{}|^`') | {chr(c) for c in range(0x21)}


class _LineScanner:
    """Cursor over a single N-Triples line; columns are 1-based in errors."""

    def __init__(self, text: str, lineno: int):
        self.s = text
        self.i = 0
        self.lineno = lineno

    def error(self, msg: str, at: int | None = None) -> ParseError:
        return ParseError(msg, self.lineno, (self.i if at is None else at) + 1)

    def skip_ws(self) -> None:
        s, i = self.s, self.i
        while i < len(s) and s[i] in " \t":
            i += 1
        self.i = i

    def at_end(self) -> bool:
        return self.i >= len(self.s)

    def peek(self) -> str:
        return self.s[self.i] if self.i < len(self.s) else ""

    def _unicode_escape(self, width: int) -> str:
        start = self.i
        digits = self.s[self.i + 1 : self.i + 1 + width]
        if len(digits) != width or not all(c in "0123456789abcdefABCDEF" for c in digits):
            raise self.error(f"bad \\{self.s[self.i]} escape", start - 1)
        self.i += 1 + width
        try:
            return chr(int(digits, 16))
        except ValueError:
            raise self.error("escape outside Unicode range", start - 1) from None

    def iri(self) -> IRI:
        start = self.i
        self.i += 1  # '<'
        out = []
        s = self.s
        while True:
            if self.i >= len(s):
                raise self.error("unterminated IRI", start)
            ch = s[self.i]
            if ch == ">":
                self.i += 1
                break
            if ch == "\\":
                self.i += 1
                kind = self.peek()
                if kind == "u":
                    out.append(self._unicode_escape(4))
                elif kind == "U":
                    out.append(self._unicode_escape(8))
                else:
                    raise self.error("only \\u and \\U escapes are allowed in IRIs", self.i - 1)
                continue
            if ch in _IRI_FORBIDDEN:
                raise self.error(f"character {ch!r} not allowed in IRI")
            out.append(ch)
            self.i += 1
        text = "".join(out)
        try:
            validate_iri(text)
        except ValidationError as exc:
            raise self.error(str(exc), start) from None
        return IRI(text)

    def bnode(self) -> BNode:
        start = self.i
        if not self.s.startswith("_:", self.i):
            raise self.error("expected blank node")
        m = _BNODE_LABEL.match(self.s, self.i + 2)
        if not m:
            raise self.error("bad blank node label", start)
        self.i = m.end()
        return BNode(m.group())

    def literal(self) -> Literal:
        start = self.i
        self.i += 1  # opening quote
        s = self.s
        out = []
        while True:
            if self.i >= len(s):
                raise self.error("unterminated literal", start)
            ch = s[self.i]
            if ch == '"':
                self.i += 1
                break
            if ch == "\\":
                self.i += 1
                kind = self.peek()
                if kind == "u":
                    out.append(self._unicode_escape(4))
                elif kind == "U":
                    out.append(self._unicode_escape(8))
                elif kind in _ECHAR:
                    out.append(_ECHAR[kind])
                    self.i += 1
                else:
                    raise self.error("bad escape in literal", self.i - 1)
                continue
            if ch in "\n\r":
                raise self.error("raw line break in literal")
            out.append(ch)
            self.i += 1
        lexical = "".join(out)
        if self.peek() == "@":
            m = _LANGTAG.match(s, self.i + 1)
            if not m:
                raise self.error("bad language tag")
            self.i = m.end()
            return Literal(lexical, lang=m.group())
        if s.startswith("^^", self.i):
            self.i += 2
            if self.peek() != "<":
                raise self.error("expected datatype IRI after '^^'")
            return Literal(lexical, datatype=str(self.iri()))
        return Literal(lexical)

    def subject(self) -> IRI | BNode:
        ch = self.peek()
        if ch == "<":
            return self.iri()
        if ch == "_":
            return self.bnode()
        raise self.error("expected subject IRI or blank node")

    def predicate(self) -> IRI:
        if self.peek() != "<":
            raise self.error("expected predicate IRI")
        return self.iri()

    def object(self) -> Term:
        ch = self.peek()
        if ch == "<":
            return self.iri()
        if ch == "_":
            return self.bnode()
        if ch == '"':
            return self.literal()
        if ch == "" or ch == ".":
            raise self.error("missing object")
        raise self.error("expected object IRI, blank node or literal")


def parse_line(text: str, lineno: int = 1) -> Triple | None:
    """Parse one N-Triples line; None for blank and comment-only lines."""
    sc = _LineScanner(text.rstrip("\r\n"), lineno)
    sc.skip_ws()
    if sc.at_end() or sc.peek() == "#":
        return None
    subj = sc.subject()
    sc.skip_ws()
    pred = sc.predicate()
    sc.skip_ws()
    obj = sc.object()
    sc.skip_ws()
    if sc.peek() != ".":
        raise sc.error("expected '.' terminating the statement")
    sc.i += 1
    sc.skip_ws()
    if not sc.at_end() and sc.peek() != "#":
        raise sc.error("unexpected content after '.'")
    return Triple(subj, pred, obj)


def iter_triples(stream: Iterable[bytes] | Iterable[str]) -> Iterator[tuple[int, Triple]]:
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8: {exc.reason}", lineno, exc.start + 1) from None
        triple = parse_line(raw, lineno)
        if triple is not None:
            yield lineno, triple


@dataclass
class ParseReport:
    total: int = 0
    consumed: Counter = field(default_factory=Counter)
    ignored: int = 0
    blank_node_statements: int = 0
    dropped_typings: int = 0
    semantic_errors: list[dict] = field(default_factory=list)

    @property
    def consumed_total(self) -> int:
        return sum(self.consumed.values())

    def to_dict(self) -> dict:
        return {
            "total_triples": self.total,
            "consumed": dict(sorted(self.consumed.items())),
            "consumed_total": self.consumed_total,
            "ignored_triples": self.ignored,
            "blank_node_statements": self.blank_node_statements,
            "dropped_typings": self.dropped_typings,
            "semantic_errors": self.semantic_errors,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def parse_ntriples(
    stream: Iterable[bytes] | Iterable[str] | BinaryIO | TextIO,
    vocab: VocabularyMap | None = None,
    report: ParseReport | None = None,
) -> KnowledgeBase:
    """Build a KnowledgeBase from N-Triples lines.

    Typings and labels are resolved after the full pass, so a class declared
    late in the file still picks up earlier ``rdf:type`` statements. Classes
    are interned in IRI order, which makes the result independent of line order.
    """
    vocab = vocab or VocabularyMap()
    report = report if report is not None else ParseReport()

    class_iris: set[str] = set()
    subclass: list[tuple[str, str]] = []
    disjoint: list[tuple[str, str]] = []
    typings: list[tuple[str, str]] = []
    labels: list[tuple[str, str, str | None, str]] = []

    def semantic_error(lineno: int, msg: str) -> None:
        report.semantic_errors.append({"line": lineno, "message": msg})
        report.ignored += 1
        log.warning("line %d: %s (statement skipped)", lineno, msg)

    for lineno, (s, p, o) in iter_triples(stream):
        report.total += 1
        if isinstance(s, BNode) or isinstance(o, BNode):
            report.blank_node_statements += 1
            report.ignored += 1
            continue
        if p == vocab.subclass_pred or p == vocab.disjoint_pred:
            if not isinstance(o, IRI):
                semantic_error(lineno, f"literal object for <{p}>")
                continue
            if p == vocab.subclass_pred:
                subclass.append((s, o))
                report.consumed["subclass"] += 1
            else:
                if s == o:
                    semantic_error(lineno, f"class <{s}> asserted disjoint with itself")
                    continue
                disjoint.append((s, o))
                report.consumed["disjoint"] += 1
            class_iris.update((s, o))
        elif p == vocab.type_pred and isinstance(o, IRI):
            if o == vocab.class_marker:
                class_iris.add(s)
                report.consumed["class_declaration"] += 1
            else:
                typings.append((s, o))
        elif p in vocab.label_preds and isinstance(o, Literal):
            labels.append((s, o.lexical, o.lang, p))
        else:
            report.ignored += 1

    kb = KnowledgeBase()
    for iri in sorted(class_iris):
        kb.intern(iri)
    for child, parent in subclass:
        kb.add_subclass(kb.intern(child), kb.intern(parent))
    for a, b in disjoint:
        kb.add_disjoint(kb.intern(a), kb.intern(b))
    for individual, cls in typings:
        c = kb.lookup(cls)
        if c is None:
            report.dropped_typings += 1
            report.ignored += 1
            continue
        kb.add_instance(individual, c)
        report.consumed["type"] += 1
    for subj, text, lang, pred in labels:
        c = kb.lookup(subj)
        if c is None:
            report.ignored += 1
            continue
        kb.add_label(c, text, lang, pred)
        report.consumed["label"] += 1
    return kb


def parse_file(path, vocab: VocabularyMap | None = None, report: ParseReport | None = None) -> KnowledgeBase:
    with open(path, "rb") as fh:
        return parse_ntriples(fh, vocab, report)


def parse_text(text: str, vocab: VocabularyMap | None = None, report: ParseReport | None = None) -> KnowledgeBase:
    return parse_ntriples(io.StringIO(text), vocab, report)
