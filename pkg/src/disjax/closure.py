"""Subclass closure, the canonical pair matrix, and the passes that label every
pair whose (non-)disjointness already follows from the knowledge base."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator

from disjax.errors import InvariantViolation, LoadError
from disjax.model import ClassId, KnowledgeBase

log = logging.getLogger(__name__)

Pair = tuple[ClassId, ClassId]


class Label(IntEnum):
    UNKNOWN = 0
    DISJOINT = 1
    NOT_DISJOINT = 2
    CONFLICT = 3

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "Label":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise LoadError(f"unknown label token {token!r}") from None


class Provenance(IntEnum):
    NONE = 0
    ASSERTED = 1
    INFERRED_DISJOINT = 2
    JOINT_SUBCLASS = 3
    JOINT_INSTANCE = 4
    ORACLE_VERDICT = 5
    ORACLE_PROPAGATION = 6
    CONFLICT_EVIDENCE = 7
    GOLD = 8

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "Provenance":
        token = token.strip()
        if not token:
            return cls.NONE
        try:
            return cls[token.upper()]
        except KeyError:
            raise LoadError(f"unknown provenance token {token!r}") from None


TSV_HEADER = ("class_a", "class_b", "label", "provenance")


class SubclassClosure:
    """Reflexive-transitive closure of the asserted subclass edges.

    ``reach[c]`` holds every superclass of ``c`` (``c`` included) and
    ``desc[c]`` every subclass. Cycles collapse into mutual subsumption.
    """

    def __init__(self, reach: list[frozenset[ClassId]]):
        self.reach = reach
        desc: list[set[ClassId]] = [set() for _ in reach]
        for c, sups in enumerate(reach):
            for d in sups:
                desc[d].add(c)
        self.desc = [frozenset(s) for s in desc]

    def __len__(self) -> int:
        return len(self.reach)

    def is_sub(self, c: ClassId, d: ClassId) -> bool:
        """True iff ``c`` is a (reflexive) subclass of ``d``."""
        return d in self.reach[c]

    def dominates(self, upper: Pair, lower: Pair) -> bool:
        """Pair-wise subsumption in either orientation."""
        (d1, d2), (c1, c2) = upper, lower
        r1, r2 = self.reach[c1], self.reach[c2]
        return (d1 in r1 and d2 in r2) or (d2 in r1 and d1 in r2)


def compute_closure(kb: KnowledgeBase) -> SubclassClosure:
    parents: list[list[ClassId]] = [[] for _ in kb.classes]
    for child, parent in kb.subclass_edges:
        parents[child].append(parent)
    reach = []
    for c in kb.classes:
        seen = {c}
        stack = [c]
        while stack:
            for p in parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        reach.append(frozenset(seen))
    return SubclassClosure(reach)


class PairMatrix:
    """All unordered pairs of distinct classes, ordered by IRI, each with a
    label and the provenance of that label."""

    def __init__(self, kb: KnowledgeBase):
        self.kb = kb
        self.order: list[ClassId] = kb.sorted_classes()
        self.pos: dict[ClassId, int] = {c: i for i, c in enumerate(self.order)}
        n = self.n = len(self.order)
        size = n * (n - 1) // 2
        self._label = bytearray(size)
        self._prov = bytearray(size)
        self.counts: Counter[Label] = Counter({Label.UNKNOWN: size})

    def __len__(self) -> int:
        return len(self._label)

    def canonical(self, a: ClassId, b: ClassId) -> Pair:
        if a == b:
            raise InvariantViolation(f"no pair ({self.kb.iri(a)}, itself) exists")
        return (a, b) if self.pos[a] < self.pos[b] else (b, a)

    def index(self, a: ClassId, b: ClassId) -> int:
        i, j = self.pos[a], self.pos[b]
        if i > j:
            i, j = j, i
        elif i == j:
            raise InvariantViolation(f"no pair ({self.kb.iri(a)}, itself) exists")
        return i * (2 * self.n - i - 1) // 2 + (j - i - 1)

    def pair_at(self, k: int) -> Pair:
        # inverse of index(); rows shrink by one each step
        n, i = self.n, 0
        row = n - 1
        while k >= row:
            k -= row
            i += 1
            row -= 1
        return self.order[i], self.order[i + 1 + k]

    def pairs(self) -> Iterator[Pair]:
        order = self.order
        for i in range(self.n):
            a = order[i]
            for j in range(i + 1, self.n):
                yield a, order[j]

    def get(self, a: ClassId, b: ClassId) -> Label:
        return Label(self._label[self.index(a, b)])

    def provenance(self, a: ClassId, b: ClassId) -> Provenance:
        return Provenance(self._prov[self.index(a, b)])

    def set(self, a: ClassId, b: ClassId, label: Label, prov: Provenance) -> None:
        """Set a label respecting the transition rules: only Unknown may be
        overwritten, except that Disjoint/NotDisjoint may escalate to Conflict."""
        k = self.index(a, b)
        old = Label(self._label[k])
        if old == label:
            return
        if old != Label.UNKNOWN and label != Label.CONFLICT:
            raise InvariantViolation(
                f"refusing to overwrite {old.token} with {label.token} on "
                f"({self.kb.iri(a)}, {self.kb.iri(b)})"
            )
        if old == Label.CONFLICT:
            raise InvariantViolation("conflict is terminal")
        self._label[k] = label
        self._prov[k] = prov
        self.counts[old] -= 1
        self.counts[label] += 1

    def labeled(self, label: Label) -> Iterator[Pair]:
        target = int(label)
        for lab, pair in zip(self._label, self.pairs()):
            if lab == target:
                yield pair

    def unknown_pairs(self) -> list[Pair]:
        return list(self.labeled(Label.UNKNOWN))

    @property
    def unknown_count(self) -> int:
        return self.counts[Label.UNKNOWN]

    def label_map(self) -> dict[tuple[str, str], Label]:
        """IRI-keyed view of every pair's label, for comparisons across KBs."""
        iri = self.kb.iri
        return {(iri(a), iri(b)): self.get(a, b) for a, b in self.pairs()}

    def copy(self) -> "PairMatrix":
        new = PairMatrix.__new__(PairMatrix)
        new.kb, new.order, new.pos, new.n = self.kb, self.order, self.pos, self.n
        new._label = bytearray(self._label)
        new._prov = bytearray(self._prov)
        new.counts = Counter(self.counts)
        return new

    def summary(self) -> dict[str, int]:
        return {
            "pairs": len(self),
            "disjoint": self.counts[Label.DISJOINT],
            "not_disjoint": self.counts[Label.NOT_DISJOINT],
            "unknown": self.counts[Label.UNKNOWN],
            "conflicts": self.counts[Label.CONFLICT],
        }

    def write_tsv(self, path: str | Path, include: Iterable[Label] | None = None) -> None:
        keep = None if include is None else {int(x) for x in include}
        iri = self.kb.iri
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\t".join(TSV_HEADER) + "\n")
            for k, (a, b) in enumerate(self.pairs()):
                lab = self._label[k]
                if keep is not None and lab not in keep:
                    continue
                fh.write(f"{iri(a)}\t{iri(b)}\t{Label(lab).token}\t{Provenance(self._prov[k]).token}\n")

    @classmethod
    def read_tsv(cls, path: str | Path, kb: KnowledgeBase | None = None) -> "PairMatrix":
        """Load a matrix export. Without ``kb``, classes are interned from the
        IRIs in the file. Unlisted pairs stay Unknown."""
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header[:3]) != TSV_HEADER[:3]:
                raise LoadError(f"{path}: expected header {'<TAB>'.join(TSV_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row or not "".join(row).strip():
                    continue
                if len(row) < 3:
                    raise LoadError(f"{path}:{lineno}: expected at least 3 columns")
                label = Label.from_token(row[2])
                prov = Provenance.from_token(row[3]) if len(row) > 3 else Provenance.NONE
                rows.append((lineno, row[0].strip(), row[1].strip(), label, prov))
        if kb is None:
            kb = KnowledgeBase()
            for iri in sorted({r[1] for r in rows} | {r[2] for r in rows}):
                kb.intern(iri)
        m = cls(kb)
        for lineno, ia, ib, label, prov in rows:
            a, b = kb.lookup(ia), kb.lookup(ib)
            if a is None or b is None:
                raise LoadError(f"{path}:{lineno}: class not in ontology: {ia if a is None else ib}")
            if a == b:
                raise LoadError(f"{path}:{lineno}: reflexive pair")
            if label == Label.UNKNOWN:
                continue
            k = m.index(a, b)
            if m._label[k] not in (Label.UNKNOWN, label):
                raise LoadError(f"{path}:{lineno}: pair listed twice with different labels")
            m._label[k] = label
            m._prov[k] = prov
        m.counts = Counter({Label(x): c for x, c in Counter(m._label).items()})
        return m


@dataclass
class Diagnostics:
    incoherent_classes: set[ClassId] = field(default_factory=set)
    unsat_witnesses: list[tuple[str, ClassId, ClassId]] = field(default_factory=list)
    conflicts: list[tuple[Pair, Provenance, Provenance]] = field(default_factory=list)

    def to_dict(self, kb: KnowledgeBase) -> dict:
        iri = kb.iri
        return {
            "incoherent_classes": sorted(iri(c) for c in self.incoherent_classes),
            "unsat_witnesses": [
                {"individual": e, "class_a": iri(a), "class_b": iri(b)} for e, a, b in self.unsat_witnesses
            ],
            "conflicts": [
                {"class_a": iri(a), "class_b": iri(b), "disjoint_provenance": dp.token, "evidence_provenance": ep.token}
                for (a, b), dp, ep in self.conflicts
            ],
        }

    def write_json(self, path: str | Path, kb: KnowledgeBase) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(kb), fh, indent=2)
            fh.write("\n")


def build_pair_matrix(kb: KnowledgeBase) -> PairMatrix:
    return PairMatrix(kb)


def _mark_overlap(m: PairMatrix, diag: Diagnostics, a: ClassId, b: ClassId, prov: Provenance) -> bool:
    """Record evidence that a and b share members. Returns True if the pair
    went from Unknown to NotDisjoint."""
    k = m.index(a, b)
    cur = m._label[k]
    if cur == Label.UNKNOWN:
        m.set(a, b, Label.NOT_DISJOINT, prov)
        return True
    if cur == Label.DISJOINT:
        dprov = Provenance(m._prov[k])
        m.set(a, b, Label.CONFLICT, Provenance.CONFLICT_EVIDENCE)
        diag.conflicts.append((m.canonical(a, b), dprov, prov))
        log.debug("conflict: %s vs %s is disjoint (%s) but has %s", m.kb.iri(a), m.kb.iri(b), dprov.token, prov.token)
    return False


def propagate_asserted_disjointness(
    m: PairMatrix, kb: KnowledgeBase, cl: SubclassClosure, diag: Diagnostics | None = None
) -> int:
    diag = diag if diag is not None else Diagnostics()
    count = 0
    asserted = sorted((tuple(sorted(p, key=m.pos.__getitem__)) for p in kb.asserted_disjoint), key=lambda p: (m.pos[p[0]], m.pos[p[1]]))
    for d1, d2 in asserted:
        if m.get(d1, d2) == Label.UNKNOWN:
            m.set(d1, d2, Label.DISJOINT, Provenance.ASSERTED)
            count += 1
    for d1, d2 in asserted:
        down2 = cl.desc[d2]
        for c1 in cl.desc[d1]:
            if c1 in down2:
                diag.incoherent_classes.add(c1)
            for c2 in down2:
                if c1 == c2:
                    continue
                k = m.index(c1, c2)
                cur = m._label[k]
                if cur == Label.UNKNOWN:
                    m.set(c1, c2, Label.DISJOINT, Provenance.INFERRED_DISJOINT)
                    count += 1
                elif cur == Label.NOT_DISJOINT:
                    eprov = Provenance(m._prov[k])
                    m.set(c1, c2, Label.CONFLICT, Provenance.CONFLICT_EVIDENCE)
                    diag.conflicts.append((m.canonical(c1, c2), Provenance.INFERRED_DISJOINT, eprov))
    return count


def mark_joint_subclass_pairs(m: PairMatrix, cl: SubclassClosure, diag: Diagnostics | None = None) -> int:
    diag = diag if diag is not None else Diagnostics()
    count = 0
    pos = m.pos
    for sups in cl.reach:
        if len(sups) < 2:
            continue
        ordered = sorted(sups, key=pos.__getitem__)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                count += _mark_overlap(m, diag, a, b, Provenance.JOINT_SUBCLASS)
    return count


def closed_instance_types(kb: KnowledgeBase, cl: SubclassClosure) -> dict[str, frozenset[ClassId]]:
    out = {}
    for individual, types in kb.instance_types.items():
        closed: set[ClassId] = set()
        for c in types:
            closed |= cl.reach[c]
        out[individual] = frozenset(closed)
    return out


def mark_joint_instance_pairs(
    m: PairMatrix, kb: KnowledgeBase, cl: SubclassClosure, diag: Diagnostics | None = None
) -> int:
    diag = diag if diag is not None else Diagnostics()
    count = 0
    pos = m.pos
    for individual, closed in sorted(closed_instance_types(kb, cl).items()):
        ordered = sorted(closed, key=pos.__getitem__)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                cur = m._label[m.index(a, b)]
                if cur in (Label.DISJOINT, Label.CONFLICT):
                    diag.unsat_witnesses.append((individual, a, b))
                count += _mark_overlap(m, diag, a, b, Provenance.JOINT_INSTANCE)
    return count


def run_algorithm1(kb: KnowledgeBase, assume_nonempty: bool = True) -> tuple[PairMatrix, Diagnostics]:
    """Label every pair whose status follows from the knowledge base.

    With ``assume_nonempty`` every named class is taken to have members, so a
    common subclass is evidence of overlap.
    """
    cl = compute_closure(kb)
    m = build_pair_matrix(kb)
    diag = Diagnostics()
    n_dis = propagate_asserted_disjointness(m, kb, cl, diag)
    n_sub = mark_joint_subclass_pairs(m, cl, diag) if assume_nonempty else 0
    n_inst = mark_joint_instance_pairs(m, kb, cl, diag)
    log.info(
        "closure: %d pairs, %d disjoint, %d joint-subclass, %d joint-instance, %d conflicts",
        len(m), n_dis, n_sub, n_inst, len(diag.conflicts),
    )
    return m, diag
