"""Disjointness enrichment of ontology class hierarchies.

Logical closure over the taxonomy decides what the knowledge base already
entails; a yes/no language-model oracle resolves the rest, one pair at a time,
with every verdict propagated through the subclass closure.
"""

from disjax.closure import (
    Diagnostics,
    Label,
    PairMatrix,
    Provenance,
    SubclassClosure,
    compute_closure,
    run_algorithm1,
)
from disjax.enrich import EnrichmentRun, Lexicographic, RandomSelection, prune, run_algorithm2
from disjax.model import KnowledgeBase, label_of
from disjax.ntriples import parse_ntriples
from disjax.oracle import Oracle, PromptSpec, QAMode, Strategy, render_prompt

__all__ = [
    "Diagnostics",
    "EnrichmentRun",
    "KnowledgeBase",
    "Label",
    "Lexicographic",
    "Oracle",
    "PairMatrix",
    "PromptSpec",
    "Provenance",
    "QAMode",
    "RandomSelection",
    "Strategy",
    "SubclassClosure",
    "compute_closure",
    "label_of",
    "parse_ntriples",
    "prune",
    "render_prompt",
    "run_algorithm1",
    "run_algorithm2",
]

__version__ = "0.1.0"
