"""Random knowledge bases and brute-force reference implementations.

Nothing here imports the reasoner code paths it is used to check; the only
shared pieces are the data containers (KnowledgeBase, Label).
"""

from __future__ import annotations

import itertools
import random

from disjax.closure import Label
from disjax.model import KnowledgeBase

EX = "http://ex.org/onto/"
IND = "http://ex.org/ind/"


def _names(rng: random.Random, n: int) -> list[str]:
    # shuffled so IRI order and topological order are unrelated
    letters = [f"{chr(65 + i // 26)}{chr(65 + i % 26)}" for i in range(n)]
    rng.shuffle(letters)
    return [EX + s for s in letters]


def random_dag(rng: random.Random, n: int, edge_p: float) -> list[tuple[int, int]]:
    """Edges child -> parent where parents come earlier in a hidden order."""
    edges = []
    for child in range(1, n):
        for parent in range(child):
            if rng.random() < edge_p:
                edges.append((child, parent))
    return edges


def model_kb(rng: random.Random, n: int | None = None, edge_p: float | None = None):
    """A KB built from a concrete interpretation, so it is satisfiable and
    every class is non-empty. Returns (kb, gold) with gold keyed by sorted IRI pair."""
    n = n if n is not None else rng.randint(2, 12)
    edge_p = edge_p if edge_p is not None else rng.uniform(0.05, 0.4)
    iris = _names(rng, n)
    edges = random_dag(rng, n, edge_p)
    domain = max(2, int(n * rng.uniform(0.6, 2.0)))
    base = [set(rng.sample(range(domain), rng.randint(1, 2))) for _ in range(n)]
    below = {c: {c} for c in range(n)}
    changed = True
    while changed:
        changed = False
        for child, parent in edges:
            new = below[child] - below[parent]
            if new:
                below[parent] |= new
                changed = True
    ext = [set().union(*(base[s] for s in below[c])) for c in range(n)]

    kb = KnowledgeBase()
    ids = [kb.intern(iri) for iri in iris]
    for child, parent in edges:
        kb.add_subclass(ids[child], ids[parent])
    gold = {}
    for a, b in itertools.combinations(range(n), 2):
        key = tuple(sorted((iris[a], iris[b])))
        gold[key] = Label.DISJOINT if not (ext[a] & ext[b]) else Label.NOT_DISJOINT
    assert_p = rng.uniform(0.0, 0.3)
    for a, b in itertools.combinations(range(n), 2):
        if not (ext[a] & ext[b]) and rng.random() < assert_p:
            kb.add_disjoint(ids[a], ids[b])
    inst_p = rng.uniform(0.0, 0.4)
    for c in range(n):
        for e in base[c]:
            if rng.random() < inst_p:
                kb.add_instance(f"{IND}e{e}", ids[c])
    return kb, gold


def wild_kb(rng: random.Random, n: int | None = None) -> KnowledgeBase:
    """Unconstrained random assertions: may be incoherent, unsatisfiable or cyclic."""
    n = n if n is not None else rng.randint(0, 12)
    iris = _names(rng, n)
    kb = KnowledgeBase()
    ids = [kb.intern(iri) for iri in iris]
    if n == 0:
        return kb
    for child, parent in random_dag(rng, n, rng.uniform(0.0, 0.35)):
        kb.add_subclass(ids[child], ids[parent])
    if n > 2 and rng.random() < 0.2:
        a, b = rng.sample(range(n), 2)
        kb.add_subclass(ids[a], ids[b])  # may close a cycle
    for _ in range(rng.randint(0, 3)):
        if n >= 2:
            a, b = rng.sample(range(n), 2)
            kb.add_disjoint(ids[a], ids[b])
    for e in range(rng.randint(0, 4)):
        for c in rng.sample(range(n), min(n, rng.randint(1, 2))):
            kb.add_instance(f"{IND}w{e}", ids[c])
    return kb


def brute_subsumption(kb: KnowledgeBase) -> dict[tuple[str, str], bool]:
    """sub[(x, y)] iff x is (reflexively) below y, by naive fixpoint over edges."""
    iris = list(kb.iris)
    sub = {(x, y): x == y for x in iris for y in iris}
    edges = [(kb.iri(c), kb.iri(p)) for c, p in kb.subclass_edges]
    changed = True
    while changed:
        changed = False
        for x in iris:
            for c, p in edges:
                if sub[(x, c)] and not sub[(x, p)]:
                    sub[(x, p)] = True
                    changed = True
    return sub


def dfs_reachable(kb: KnowledgeBase, src: str, dst: str) -> bool:
    if src == dst:
        return True
    parents: dict[str, list[str]] = {}
    for c, p in kb.subclass_edges:
        parents.setdefault(kb.iri(c), []).append(kb.iri(p))
    seen, stack = {src}, [src]
    while stack:
        for nxt in parents.get(stack.pop(), []):
            if nxt == dst:
                return True
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def brute_algorithm1(kb: KnowledgeBase, assume_nonempty: bool = True):
    """Exhaustive application of the three derivation rules.

    Returns (labels keyed by sorted IRI pair, incoherent IRIs, unsat witness set).
    """
    iris = sorted(kb.iris)
    sub = brute_subsumption(kb)
    direct = [(kb.iri(c), kb.iri(p)) for c, p in kb.subclass_edges]

    # disjointness: start from assertions, push down one direct edge at a time
    dis = set()
    for p in kb.asserted_disjoint:
        a, b = (kb.iri(c) for c in p)
        dis |= {(a, b), (b, a)}
    changed = True
    while changed:
        changed = False
        for x, y in list(dis):
            for child, parent in direct:
                if parent == x and (child, y) not in dis:
                    dis |= {(child, y), (y, child)}
                    changed = True
    incoherent = {x for x, y in dis if x == y}

    joint_sub = set()
    if assume_nonempty:
        for s in iris:
            for x, y in itertools.combinations(iris, 2):
                if sub[(s, x)] and sub[(s, y)]:
                    joint_sub.add((x, y))

    members: dict[str, set[str]] = {x: set() for x in iris}
    for e, cs in kb.instance_types.items():
        for c in cs:
            for y in iris:
                if sub[(kb.iri(c), y)]:
                    members[y].add(e)
    joint_inst = {(x, y) for x, y in itertools.combinations(iris, 2) if members[x] & members[y]}

    labels = {}
    witnesses = set()
    for x, y in itertools.combinations(iris, 2):
        d = (x, y) in dis
        overlap = (x, y) in joint_sub or (x, y) in joint_inst
        if d and overlap:
            labels[(x, y)] = Label.CONFLICT
        elif d:
            labels[(x, y)] = Label.DISJOINT
        elif overlap:
            labels[(x, y)] = Label.NOT_DISJOINT
        else:
            labels[(x, y)] = Label.UNKNOWN
        if d:
            witnesses |= {(e, x, y) for e in members[x] & members[y]}
    return labels, incoherent, witnesses


def brute_entailed(pairs, sub, iris) -> set[tuple[str, str]]:
    """All distinct sorted IRI pairs below some pair of ``pairs``."""
    out = set()
    for a, b in pairs:
        for x in iris:
            for y in iris:
                if x < y and ((sub[(x, a)] and sub[(y, b)]) or (sub[(x, b)] and sub[(y, a)])):
                    out.add((x, y))
    return out


def naive_prune(pairs: list[tuple[str, str]], sub, iris) -> set[tuple[str, str]]:
    """Remove-and-check: drop a pair whenever the rest still entails everything."""
    target = brute_entailed(pairs, sub, iris)
    current = sorted(set(pairs))
    for p in list(current):
        trial = [q for q in current if q != p]
        if brute_entailed(trial, sub, iris) == target:
            current = trial
    return set(current)


def three_level_fixture() -> tuple[KnowledgeBase, dict]:
    """Two roots; each has three children, two of which carry one grandchild.
    Gold: everything across the two subtrees is disjoint, everything within a
    subtree overlaps."""
    kb = KnowledgeBase()
    subtree: dict[str, str] = {}
    for root in ("A", "B"):
        r = kb.intern(EX + root)
        subtree[EX + root] = root
        for i in (1, 2, 3):
            child = kb.intern(f"{EX}{root}_c{i}")
            subtree[kb.iri(child)] = root
            kb.add_subclass(child, r)
            if i <= 2:
                grand = kb.intern(f"{EX}{root}_c{i}_g1")
                subtree[kb.iri(grand)] = root
                kb.add_subclass(grand, child)
    gold = {}
    for x, y in itertools.combinations(sorted(kb.iris), 2):
        gold[(x, y)] = Label.DISJOINT if subtree[x] != subtree[y] else Label.NOT_DISJOINT
    return kb, gold


def gold_mock(gold: dict[tuple[str, str], Label]):
    from disjax.oracle import GoldMock

    return GoldMock({frozenset(k): v for k, v in gold.items()})


def has_chain(kb: KnowledgeBase, length: int = 2) -> bool:
    """True if some class sits ``length`` proper subclass steps below another."""
    sub = brute_subsumption(kb)
    iris = kb.iris
    strict = {(x, y) for x in iris for y in iris if x != y and sub[(x, y)] and not sub[(y, x)]}
    for x, y in strict:
        for z in iris:
            if (y, z) in strict:
                return True
    return False


def to_ntriples(kb: KnowledgeBase) -> str:
    """Serialize the asserted content of ``kb`` (classes, edges, disjointness, typings)."""
    sub = "<http://www.w3.org/2000/01/rdf-schema#subClassOf>"
    dw = "<http://www.w3.org/2002/07/owl#disjointWith>"
    typ = "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>"
    owl_class = "<http://www.w3.org/2002/07/owl#Class>"
    lines = [f"<{kb.iri(c)}> {typ} {owl_class} .\n" for c in kb.classes]
    lines += [f"<{kb.iri(c)}> {sub} <{kb.iri(p)}> .\n" for c, p in kb.subclass_edges]
    for p in kb.asserted_disjoint:
        a, b = sorted(kb.iri(c) for c in p)
        lines.append(f"<{a}> {dw} <{b}> .\n")
    for e, cs in kb.instance_types.items():
        lines += [f"<{e}> {typ} <{kb.iri(c)}> .\n" for c in cs]
    return "".join(sorted(lines))


def gold_tsv(gold: dict[tuple[str, str], Label]) -> str:
    rows = ["class_a\tclass_b\tlabel\tprovenance\n"]
    rows += [f"{a}\t{b}\t{lab.token}\tgold\n" for (a, b), lab in sorted(gold.items())]
    return "".join(rows)
