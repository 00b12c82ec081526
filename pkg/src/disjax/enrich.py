"""Oracle-driven resolution of the remaining unknown pairs.

Each verdict is pushed through the subclass closure: a "disjoint" answer
labels every pair below the queried one, a "not disjoint" answer every pair
above it. Already-labeled pairs are never overwritten, so the oracle is only
ever asked about pairs whose status is still open.
"""

from __future__ import annotations

import json
import logging
import os
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from disjax.closure import Label, Pair, PairMatrix, Provenance, SubclassClosure
from disjax.errors import InvariantViolation, LoadError
from disjax.model import ClassId, KnowledgeBase
from disjax.ntriples import OWL_DISJOINT_WITH
from disjax.oracle import Oracle, PromptSpec, Verdict, term

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Lexicographic:
    def __str__(self) -> str:
        return "lex"


@dataclass(frozen=True)
class RandomSelection:
    seed: int = 0

    def __str__(self) -> str:
        return f"random({self.seed})"


SelectionPolicy = Lexicographic | RandomSelection


def select_next_unknown(m: PairMatrix, policy: SelectionPolicy) -> Pair | None:
    """Pick the next pair to query.

    The random policy is a pure function of (seed, remaining unknowns), so a
    resumed run makes exactly the choices an uninterrupted one would.
    """
    labels = m._label
    remaining = m.unknown_count
    if remaining == 0:
        return None
    if isinstance(policy, Lexicographic):
        return m.pair_at(labels.find(0))
    rng = random.Random(f"{policy.seed}:{remaining}")
    nth = rng.randrange(remaining)
    k = labels.find(0)
    for _ in range(nth):
        k = labels.find(0, k + 1)
    return m.pair_at(k)


def _down_pairs(m: PairMatrix, cl: SubclassClosure, pair: Pair) -> Iterable[tuple[int, ClassId, ClassId]]:
    d1, d2 = pair
    down2 = cl.desc[d2]
    for c1 in cl.desc[d1]:
        for c2 in down2:
            if c1 != c2:
                yield m.index(c1, c2), c1, c2


def _up_pairs(m: PairMatrix, cl: SubclassClosure, pair: Pair) -> Iterable[tuple[int, ClassId, ClassId]]:
    d1, d2 = pair
    up2 = cl.reach[d2]
    for c1 in cl.reach[d1]:
        for c2 in up2:
            if c1 != c2:
                yield m.index(c1, c2), c1, c2


def guard_verdict(m: PairMatrix, cl: SubclassClosure, pair: Pair, v: Label) -> tuple[Label, Pair | None]:
    """Return the effective verdict and, on override, the witnessing pair.

    A "disjoint" answer is overridden when some pair below the queried one
    already carries overlap evidence; keeping it would make the result
    unsatisfiable.
    """
    if m.get(*pair) != Label.UNKNOWN:
        raise InvariantViolation(f"guard on already-labeled pair {pair}")
    labels = m._label
    if v == Label.DISJOINT:
        for k, c1, c2 in _down_pairs(m, cl, pair):
            if labels[k] in (Label.NOT_DISJOINT, Label.CONFLICT):
                return Label.NOT_DISJOINT, m.canonical(c1, c2)
        return v, None
    for k, c1, c2 in _up_pairs(m, cl, pair):
        if labels[k] == Label.DISJOINT:
            raise InvariantViolation(
                f"ancestor pair ({m.kb.iri(c1)}, {m.kb.iri(c2)}) is disjoint but "
                f"({m.kb.iri(pair[0])}, {m.kb.iri(pair[1])}) is unknown"
            )
    return v, None


def apply_verdict(m: PairMatrix, cl: SubclassClosure, pair: Pair, v: Label) -> tuple[int, int]:
    """Label the queried pair and everything it decides.

    Returns ``(labeled_down, labeled_up)``; the queried pair itself is counted.
    """
    if m.get(*pair) != Label.UNKNOWN:
        raise InvariantViolation(f"verdict applied to already-labeled pair ({m.kb.iri(pair[0])}, {m.kb.iri(pair[1])})")
    labels, prov = m._label, m._prov
    qk = m.index(*pair)
    if v == Label.DISJOINT:
        targets, direction = _down_pairs(m, cl, pair), 0
    elif v == Label.NOT_DISJOINT:
        targets, direction = _up_pairs(m, cl, pair), 1
    else:
        raise InvariantViolation(f"verdict must be disjoint or not_disjoint, got {v!r}")
    n = 0
    for k, _, _ in targets:
        if labels[k] == Label.UNKNOWN:
            labels[k] = v
            prov[k] = Provenance.ORACLE_VERDICT if k == qk else Provenance.ORACLE_PROPAGATION
            n += 1
    m.counts[Label.UNKNOWN] -= n
    m.counts[v] += n
    return (n, 0) if direction == 0 else (0, n)


@dataclass
class EnrichmentStats:
    total_pairs: int = 0
    initially_labeled: int = 0
    oracle_calls: int = 0
    propagated_disjoint: int = 0
    propagated_not_disjoint: int = 0
    overridden_verdicts: int = 0
    fallback_verdicts: int = 0
    conflicts: int = 0

    def accounted(self) -> int:
        return self.initially_labeled + self.oracle_calls + self.propagated_disjoint + self.propagated_not_disjoint


@dataclass
class EnrichmentRun:
    selection_policy: SelectionPolicy
    stats: EnrichmentStats
    final_matrix: PairMatrix
    events: list[dict] = field(default_factory=list)
    overrides: list[tuple[Pair, Pair]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.final_matrix.unknown_count == 0


class EventLog:
    """Append-only JSON-lines record of every committed verdict."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None

    def load(self) -> list[dict]:
        if self.path is None or not self.path.exists():
            return []
        data = self.path.read_bytes()
        events, good = [], 0
        for line in data.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                break
            try:
                events.append(json.loads(line))
            except ValueError:
                break
            good += len(line)
        if good < len(data):
            log.warning("dropping torn tail of event log %s", self.path)
            with open(self.path, "r+b") as fh:
                fh.truncate(good)
        return events

    def append(self, event: dict) -> None:
        if self.path is None:
            return
        with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def _commit(
    run: EnrichmentRun,
    cl: SubclassClosure,
    pair: Pair,
    raw: Label,
    fallback: bool = False,
) -> dict:
    m, stats = run.final_matrix, run.stats
    effective, witness = guard_verdict(m, cl, pair, raw)
    if witness is not None:
        stats.overridden_verdicts += 1
        run.overrides.append((pair, witness))
        log.info("override: %s / %s answered disjoint, but %s / %s overlap", *(m.kb.iri(c) for c in pair + witness))
    down, up = apply_verdict(m, cl, pair, effective)
    stats.oracle_calls += 1
    stats.propagated_disjoint += max(down - 1, 0)
    stats.propagated_not_disjoint += max(up - 1, 0)
    stats.fallback_verdicts += fallback
    event = {
        "step": stats.oracle_calls,
        "class_a": m.kb.iri(pair[0]),
        "class_b": m.kb.iri(pair[1]),
        "verdict": raw.token,
        "effective": effective.token,
        "overridden": witness is not None,
        "fallback": fallback,
        "labeled_down": down,
        "labeled_up": up,
        "unknown_after": m.unknown_count,
    }
    run.events.append(event)
    return event


def start_run(m: PairMatrix, policy: SelectionPolicy, conflicts: int = 0) -> EnrichmentRun:
    stats = EnrichmentStats(total_pairs=len(m), initially_labeled=len(m) - m.unknown_count, conflicts=conflicts)
    return EnrichmentRun(policy, stats, m)


def replay(run: EnrichmentRun, cl: SubclassClosure, events: Iterable[dict]) -> None:
    """Re-apply logged verdicts (no oracle involved) to resume a run."""
    m = run.final_matrix
    for ev in events:
        a, b = m.kb.lookup(ev["class_a"]), m.kb.lookup(ev["class_b"])
        if a is None or b is None:
            raise LoadError(f"event log names a class outside the ontology: {ev}")
        pair = m.canonical(a, b)
        _commit(run, cl, pair, Label.from_token(ev["verdict"]), ev.get("fallback", False))
        if m.unknown_count != ev["unknown_after"]:
            raise InvariantViolation(f"event log diverges from recomputed state at step {ev.get('step')}")


def run_algorithm2(
    m: PairMatrix,
    cl: SubclassClosure,
    oracle: Oracle | Callable[[PromptSpec, object, object], Verdict],
    spec: PromptSpec,
    policy: SelectionPolicy = Lexicographic(),
    *,
    run: EnrichmentRun | None = None,
    on_event: Callable[[dict], None] | None = None,
    max_verdicts: int | None = None,
) -> EnrichmentRun:
    """Query until no pair is unknown (or ``max_verdicts`` new verdicts were
    committed). Mutates ``m`` in place; pass ``run`` to continue a replayed run."""
    run = run or start_run(m, policy)
    ask = oracle.query if isinstance(oracle, Oracle) else oracle
    kb = m.kb
    done = 0
    while max_verdicts is None or done < max_verdicts:
        pair = select_next_unknown(m, policy)
        if pair is None:
            break
        verdict = ask(spec, term(kb, pair[0]), term(kb, pair[1]))
        if m.get(*pair) != Label.UNKNOWN:
            raise InvariantViolation("pair changed while the oracle was being queried")
        event = _commit(run, cl, pair, verdict.value, verdict.fallback)
        if on_event is not None:
            on_event(event)
        done += 1
    if run.complete and run.stats.accounted() != run.stats.total_pairs:
        raise InvariantViolation(f"pair accounting mismatch: {asdict(run.stats)}")
    return run


def disjoint_pairs(m: PairMatrix) -> set[Pair]:
    return set(m.labeled(Label.DISJOINT))


def prune(pairs: Iterable[Pair], cl: SubclassClosure, pos: dict[ClassId, int] | None = None) -> set[Pair]:
    """Keep only the pairs not subsumed by another pair of the input.

    A pair (C1, C2) is subsumed by (D1, D2) when C1 is below D1 and C2 below
    D2, in either orientation. Among pairs that subsume each other (possible
    only through subclass cycles) the one latest in ``pos`` order survives.
    """
    rank = (lambda c: c) if pos is None else pos.__getitem__

    def canon(a: ClassId, b: ClassId) -> Pair:
        return (a, b) if rank(a) < rank(b) else (b, a)

    given = {canon(a, b) for a, b in pairs if a != b}
    kept = set()
    for p in given:
        c1, c2 = p
        removed = False
        for d1 in cl.reach[c1]:
            for d2 in cl.reach[c2]:
                if d1 == d2:
                    continue
                q = canon(d1, d2)
                if q == p or q not in given:
                    continue
                if cl.dominates(p, q) and (rank(q[0]), rank(q[1])) < (rank(c1), rank(c2)):
                    continue  # equivalent pair that ranks earlier: p is the survivor
                removed = True
                break
            if removed:
                break
        if not removed:
            kept.add(p)
    return kept


def _escape_iri(iri: str) -> str:
    return "".join(c if c not in '<>"{}|^`\\' else f"\\u{ord(c):04X}" for c in iri)


def emit_axioms(pairs: Iterable[Pair], kb: KnowledgeBase, predicate: str = OWL_DISJOINT_WITH) -> str:
    lines = []
    for a, b in pairs:
        ia, ib = sorted((kb.iri(a), kb.iri(b)))
        lines.append(f"<{_escape_iri(ia)}> <{predicate}> <{_escape_iri(ib)}> .\n")
    return "".join(sorted(lines))
