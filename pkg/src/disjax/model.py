"""In-memory knowledge base: interned classes, subclass edges, disjointness
assertions, instance typings and labels."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from disjax.errors import ValidationError

RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
SKOS_PREF_LABEL = "http://www.w3.org/2004/02/skos/core#prefLabel"

ClassId = int


def validate_iri(iri: str) -> str:
    """Return ``iri`` unchanged, or raise ValidationError naming the bad character."""
    if not isinstance(iri, str) or not iri:
        raise ValidationError("IRI must be a non-empty string")
    for pos, ch in enumerate(iri):
        if ch.isspace() or unicodedata.category(ch) == "Cc":
            raise ValidationError(
                f"IRI {iri!r} contains forbidden character {ch!r} (U+{ord(ch):04X}) at offset {pos}"
            )
    if ":" not in iri:
        raise ValidationError(f"IRI {iri!r} is not absolute: missing ':'")
    return iri


def local_name(iri: str) -> str:
    cut = max(iri.rfind("/"), iri.rfind("#"))
    tail = iri[cut + 1 :]
    if not tail:
        # trailing separator, e.g. "http://ex/Thing/"
        stripped = iri.rstrip("/#")
        cut = max(stripped.rfind("/"), stripped.rfind("#"), stripped.find(":"))
        tail = stripped[cut + 1 :]
    return tail


# lower->Upper, and the last capital of an acronym before a capitalized word;
# digits never start a new word
_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def humanize(name: str) -> str:
    """'AcademicConference' -> 'academic conference'."""
    words: list[str] = []
    for chunk in re.split(r"[_\-\s]+", name):
        if chunk:
            words.extend(w for w in _CAMEL_BOUNDARY.split(chunk) if w)
    return " ".join(words).lower()


@dataclass(frozen=True)
class LabelCandidate:
    text: str
    lang: str | None = None
    source: str = RDFS_LABEL

    def rank(self) -> tuple:
        if self.lang is None:
            lang_rank = 1
        elif self.lang.lower() == "en" or self.lang.lower().startswith("en-"):
            lang_rank = 0
        else:
            lang_rank = 2
        return (lang_rank, 0 if self.source == RDFS_LABEL else 1, self.text)


@dataclass
class KnowledgeBase:
    """Classes are interned to dense integer handles; individuals stay as IRIs.

    Built single-threaded; treat as read-only once handed to the reasoner.
    """

    iris: list[str] = field(default_factory=list)
    subclass_edges: set[tuple[ClassId, ClassId]] = field(default_factory=set)
    asserted_disjoint: set[frozenset[ClassId]] = field(default_factory=set)
    instance_types: dict[str, set[ClassId]] = field(default_factory=dict)
    label_candidates: dict[ClassId, list[LabelCandidate]] = field(default_factory=dict)
    _index: dict[str, ClassId] = field(default_factory=dict, repr=False)

    @property
    def classes(self) -> range:
        return range(len(self.iris))

    def __len__(self) -> int:
        return len(self.iris)

    def intern(self, iri: str) -> ClassId:
        handle = self._index.get(iri)
        if handle is not None:
            return handle
        validate_iri(iri)
        handle = len(self.iris)
        self.iris.append(iri)
        self._index[iri] = handle
        return handle

    def lookup(self, iri: str) -> ClassId | None:
        return self._index.get(iri)

    def iri(self, c: ClassId) -> str:
        return self.iris[c]

    def _check(self, *cs: ClassId) -> None:
        for c in cs:
            if not 0 <= c < len(self.iris):
                raise ValidationError(f"unknown class handle {c}")

    def add_subclass(self, child: ClassId, parent: ClassId) -> None:
        self._check(child, parent)
        self.subclass_edges.add((child, parent))

    def add_disjoint(self, a: ClassId, b: ClassId) -> None:
        self._check(a, b)
        if a == b:
            raise ValidationError(f"class {self.iris[a]} cannot be asserted disjoint with itself")
        self.asserted_disjoint.add(frozenset((a, b)))

    def add_instance(self, individual: str, c: ClassId) -> None:
        self._check(c)
        validate_iri(individual)
        self.instance_types.setdefault(individual, set()).add(c)

    def add_label(self, c: ClassId, text: str, lang: str | None = None, source: str = RDFS_LABEL) -> None:
        self._check(c)
        self.label_candidates.setdefault(c, []).append(LabelCandidate(text, lang, source))

    @property
    def labels(self) -> dict[ClassId, str]:
        """The winning stored label per class (English first, rdfs:label over
        skos:prefLabel, then lexicographic)."""
        return {c: min(cands, key=LabelCandidate.rank).text for c, cands in self.label_candidates.items() if cands}

    def stored_label(self, c: ClassId) -> str | None:
        cands = self.label_candidates.get(c)
        if not cands:
            return None
        return min(cands, key=LabelCandidate.rank).text

    def pairs_by_iri(self, pairs: Iterable[frozenset[ClassId]]) -> set[tuple[str, str]]:
        out = set()
        for p in pairs:
            a, b = sorted(self.iris[c] for c in p)
            out.add((a, b))
        return out

    def signature(self) -> tuple:
        """IRI-level view, independent of interning order."""
        iris = self.iris
        return (
            frozenset(iris),
            frozenset((iris[a], iris[b]) for a, b in self.subclass_edges),
            frozenset(self.pairs_by_iri(self.asserted_disjoint)),
            frozenset((i, frozenset(iris[c] for c in cs)) for i, cs in self.instance_types.items() if cs),
            frozenset((iris[c], lab) for c, lab in self.labels.items()),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return self.signature() == other.signature()

    __hash__ = None  # mutable

    def sorted_classes(self) -> list[ClassId]:
        return sorted(self.classes, key=self.iris.__getitem__)

    def __iter__(self) -> Iterator[ClassId]:
        return iter(self.classes)


def intern(kb: KnowledgeBase, iri: str) -> ClassId:
    return kb.intern(iri)


def label_of(kb: KnowledgeBase, c: ClassId) -> str:
    stored = kb.stored_label(c)
    if stored is not None and stored.strip():
        return " ".join(stored.split()).lower()
    return humanize(local_name(kb.iri(c)))
