"""Evaluation of oracle predictions against gold pair labels.

Disjoint is the positive class. Ratios with a zero denominator are reported as
absent (None), never as 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from disjax.closure import Label, Pair, PairMatrix
from disjax.errors import DisjaxError, InvariantViolation
from disjax.oracle import Oracle, PromptSpec, Term, term


class EvaluationError(DisjaxError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def swapped(self) -> "ConfusionCounts":
        """The same counts with NotDisjoint as the positive class."""
        return ConfusionCounts(tp=self.tn, fn=self.fp, fp=self.fn, tn=self.tp)


def _ratio(num: float, den: float) -> float | None:
    return num / den if den else None


@dataclass
class MetricsReport:
    counts: ConfusionCounts
    dr: float | None = None
    ndf1: float | None = None
    f1: float | None = None
    accuracy: float | None = None
    sc: float | None = None
    n_pairs: int = 0
    n_sc_pairs: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {**self.meta}
        for key, value in (
            ("dr", self.dr),
            ("ndf1", self.ndf1),
            ("f1_disjoint", self.f1),
            ("sc", self.sc),
            ("accuracy", self.accuracy),
        ):
            if value is not None:
                out[key] = value
        out["counts"] = {"tp": self.counts.tp, "fn": self.counts.fn, "fp": self.counts.fp, "tn": self.counts.tn}
        out["n_pairs"] = self.n_pairs
        out["n_sc_pairs"] = self.n_sc_pairs
        return out

    def tsv_row(self, model: str = "", prompt: str = "", qa: str = "") -> str:
        def fmt(x: float | None) -> str:
            return "NA" if x is None else f"{x:.4f}"

        cells = [model, prompt, qa] + [fmt(x) for x in (self.dr, self.ndf1, self.f1, self.sc, self.accuracy)]
        return "\t".join(cells) + "\n"


TSV_COLUMNS = ("model", "prompt", "qa", "dr", "ndf1", "f1", "sc", "accuracy")


def gold_pairs(gold: PairMatrix) -> list[tuple[Pair, Label]]:
    return [
        (p, lab)
        for p in gold.pairs()
        if (lab := gold.get(*p)) in (Label.DISJOINT, Label.NOT_DISJOINT)
    ]


def confusion(gold: PairMatrix, predicted: Mapping[Pair, Label]) -> ConfusionCounts:
    tp = fn = fp = tn = 0
    for pair, truth in gold_pairs(gold):
        pred = predicted.get(pair)
        if pred is None:
            pred = predicted.get((pair[1], pair[0]))
        if pred is None:
            a, b = (gold.kb.iri(c) for c in pair)
            raise EvaluationError(f"no prediction for gold pair ({a}, {b})")
        if truth == Label.DISJOINT:
            if pred == Label.DISJOINT:
                tp += 1
            else:
                fn += 1
        elif pred == Label.DISJOINT:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fn, fp, tn)


def metrics(c: ConfusionCounts) -> MetricsReport:
    return MetricsReport(
        counts=c,
        dr=_ratio(c.tp, c.tp + c.fn),
        f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        ndf1=_ratio(2 * c.tn, 2 * c.tn + c.fn + c.fp),
        accuracy=_ratio(c.tp + c.tn, c.total),
        n_pairs=c.total,
    )


def symmetric_consistency(
    pairs: Sequence[tuple[Term, Term]],
    oracle: Oracle,
    spec: PromptSpec,
    forward: Mapping[tuple[str, str], Label] | None = None,
) -> float | None:
    """Fraction of pairs answered identically in both argument orders.

    ``forward`` may carry already-obtained (a, b) verdicts keyed by IRI so they
    are not asked twice.
    """
    if not pairs:
        return None
    agree = 0
    for a, b in pairs:
        ab = forward.get((a.iri, b.iri)) if forward else None
        if ab is None:
            ab = oracle.query(spec, a, b).value
        ba = oracle.query(spec, b, a).value
        agree += ab == ba
    return agree / len(pairs)


def report(gold: PairMatrix, oracle: Oracle, spec: PromptSpec, meta: dict | None = None) -> MetricsReport:
    """Canonical-order verdicts feed DR/NDF1/F1/accuracy; both orders feed SC."""
    labeled = gold_pairs(gold)
    if not labeled:
        raise EvaluationError("no gold pairs")
    kb = gold.kb
    predicted: dict[Pair, Label] = {}
    forward: dict[tuple[str, str], Label] = {}
    terms = []
    for pair, _ in labeled:
        a, b = term(kb, pair[0]), term(kb, pair[1])
        value = oracle.query(spec, a, b).value
        if value not in (Label.DISJOINT, Label.NOT_DISJOINT):
            raise InvariantViolation(f"oracle returned {value!r}")
        predicted[pair] = value
        forward[(a.iri, b.iri)] = value
        terms.append((a, b))
    rep = metrics(confusion(gold, predicted))
    rep.sc = symmetric_consistency(terms, oracle, spec, forward)
    rep.n_sc_pairs = len(terms)
    rep.meta = dict(meta or {})
    return rep


def write_report(rep: MetricsReport, out_dir: str | Path, model: str, prompt: str, qa: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    json_path, tsv_path = out_dir / "report.json", out_dir / "report.tsv"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"model": model, "prompt": prompt, "qa": qa, **rep.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(TSV_COLUMNS) + "\n")
        fh.write(rep.tsv_row(model, prompt, qa))
    return json_path, tsv_path
