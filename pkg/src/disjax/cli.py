"""disjax command line: closure, enrich, prune, eval, render-prompt.

Summaries go to stdout, logs to stderr, machine-readable outputs to files
under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from disjax.closure import Label, PairMatrix, compute_closure, run_algorithm1
from disjax.enrich import (
    EventLog,
    Lexicographic,
    RandomSelection,
    disjoint_pairs,
    emit_axioms,
    prune,
    replay,
    run_algorithm2,
    start_run,
)
from disjax.errors import (
    ConfigError,
    DisjaxError,
    InvariantViolation,
    LoadError,
    OracleError,
    ParseError,
    ValidationError,
)
from disjax.metrics import report, write_report
from disjax.ntriples import ParseReport, parse_file, parse_ntriples
from disjax.oracle import (
    ChatCompletionBackend,
    Oracle,
    OracleConfig,
    PromptSpec,
    TranscriptCache,
    format_prompt,
    mock_from_gold,
)

log = logging.getLogger("disjax")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_ORACLE, EXIT_INTERNAL = 0, 1, 2, 3, 4


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _choice(*allowed: str):
    def parse(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}, got {text!r}")
        return text

    return parse


@dataclass
class Config:
    ontology: str | None = None
    endpoint_url: str = "http://localhost:8000/v1"
    model_name: str = ""
    strategy: str = "task"
    qa_mode: str = "negative"
    temperature: float = 0.0
    seed: int = 0
    selection: str = "random"
    cache_path: str | None = None
    assume_nonempty: bool = True
    ambiguous_fallback: str = "not_disjoint"
    max_retries: int = 2
    timeout: float = 60.0
    instruction_mode: str = "system"


CONFIG_PARSERS = {
    "ontology": str,
    "endpoint_url": str,
    "model_name": str,
    "strategy": _choice("naive", "task", "fewshot"),
    "qa_mode": _choice("positive", "negative"),
    "temperature": float,
    "seed": int,
    "selection": _choice("random", "lex"),
    "cache_path": str,
    "assume_nonempty": _bool,
    "ambiguous_fallback": _choice("not_disjoint", "error"),
    "max_retries": int,
    "timeout": float,
    "instruction_mode": _choice("system", "inline"),
}


def read_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(file_values: dict[str, str], overrides: dict[str, str]) -> Config:
    cfg = Config()
    for key, raw in {**file_values, **overrides}.items():
        try:
            setattr(cfg, key, CONFIG_PARSERS[key](raw))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if cfg.max_retries < 0:
        raise ConfigError("max_retries must be >= 0")
    return cfg


def oracle_config(cfg: Config) -> OracleConfig:
    return OracleConfig(
        endpoint_url=cfg.endpoint_url,
        model_name=cfg.model_name,
        temperature=cfg.temperature,
        max_retries=cfg.max_retries,
        timeout=cfg.timeout,
        cache_path=cfg.cache_path,
        ambiguous_fallback=cfg.ambiguous_fallback,
        instruction_mode=cfg.instruction_mode,
    )


def make_oracle(cfg: Config, mock_gold: str | None, kb=None) -> Oracle:
    ocfg = oracle_config(cfg)
    if mock_gold:
        gold = PairMatrix.read_tsv(mock_gold, kb) if kb is not None else mock_gold
        backend = mock_from_gold(gold)
    else:
        backend = ChatCompletionBackend(ocfg)
    return Oracle(backend, TranscriptCache(ocfg.cache_path), ocfg.max_retries, ocfg.ambiguous_fallback)


def load_ontology(cfg: Config, report: ParseReport | None = None):
    if not cfg.ontology:
        raise ConfigError("no ontology given (config key 'ontology' or --ontology)")
    path = Path(cfg.ontology)
    if not path.is_file():
        raise ConfigError(f"ontology file not found: {path}")
    return parse_file(path, report=report)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_summary(summary: dict) -> None:
    for key, value in summary.items():
        print(f"{key}\t{value}")


def cmd_closure(args, cfg: Config) -> int:
    rep = ParseReport()
    kb = load_ontology(cfg, rep)
    m, diag = run_algorithm1(kb, assume_nonempty=cfg.assume_nonempty)
    summary = {"classes": len(kb), "asserted_disjoint": len(kb.asserted_disjoint), **m.summary()}
    summary["incoherent_classes"] = len(diag.incoherent_classes)
    summary["unsat_witnesses"] = len(diag.unsat_witnesses)
    _print_summary(summary)
    if args.dry_run:
        return EXIT_OK
    out = _out_dir(args)
    include = [Label.DISJOINT, Label.NOT_DISJOINT, Label.CONFLICT] if args.decided_only else None
    m.write_tsv(out / "closure_matrix.tsv", include=include)
    diag.write_json(out / "diagnostics.json", kb)
    (out / "parse_report.json").write_text(rep.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_enrich(args, cfg: Config) -> int:
    kb = load_ontology(cfg)
    m, diag = run_algorithm1(kb, assume_nonempty=cfg.assume_nonempty)
    cl = compute_closure(kb)
    policy = Lexicographic() if cfg.selection == "lex" else RandomSelection(cfg.seed)
    spec = PromptSpec.of(cfg.strategy, cfg.qa_mode)
    out = Path(args.out)
    events = EventLog(out / "events.jsonl")
    run = start_run(m, policy, conflicts=len(diag.conflicts))
    previous = events.load()
    if previous:
        replay(run, cl, previous)
        log.info("resumed after %d logged verdicts; %d pairs still unknown", len(previous), m.unknown_count)
    if args.dry_run:
        print(f"unknown\t{m.unknown_count}")
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    if cfg.cache_path is None:
        cfg.cache_path = str(out / "transcript.jsonl")
    oracle = make_oracle(cfg, args.mock_gold, kb)
    run_algorithm2(m, cl, oracle, spec, policy, run=run, on_event=events.append, max_verdicts=args.max_verdicts)
    m.write_tsv(out / "matrix.tsv")
    stats = asdict(run.stats)
    stats["unknown"] = m.unknown_count
    (out / "enrich_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not run.complete:
        print(f"paused\t{m.unknown_count} unknown pairs remain; rerun to resume", file=sys.stderr)
        _print_summary({"oracle_calls": run.stats.oracle_calls, **m.summary()})
        return EXIT_OK
    full = disjoint_pairs(m)
    kept = prune(full, cl, m.pos)
    (out / "disjoint_all.nt").write_text(emit_axioms(full, kb), encoding="utf-8")
    (out / "axioms.nt").write_text(emit_axioms(kept, kb), encoding="utf-8")
    _print_summary(
        {
            "oracle_calls": run.stats.oracle_calls,
            **m.summary(),
            "overridden_verdicts": run.stats.overridden_verdicts,
            "axioms_full": len(full),
            "axioms_pruned": len(kept),
        }
    )
    return EXIT_OK


def cmd_prune(args, cfg: Config) -> int:
    kb = load_ontology(cfg)
    cl = compute_closure(kb)
    src = Path(args.input)
    if not src.is_file():
        raise ConfigError(f"input file not found: {src}")
    if src.suffix == ".tsv":
        pairs = disjoint_pairs(PairMatrix.read_tsv(src, kb))
    else:
        with open(src, "rb") as fh:
            axioms = parse_ntriples(fh)
        pairs = set()
        for p in axioms.asserted_disjoint:
            ia, ib = (axioms.iri(c) for c in p)
            a, b = kb.lookup(ia), kb.lookup(ib)
            if a is None or b is None:
                raise LoadError(f"axiom names a class outside the ontology: {ia if a is None else ib}")
            pairs.add((a, b))
    pos = {c: i for i, c in enumerate(kb.sorted_classes())}
    kept = prune(pairs, cl, pos)
    n_in, n_out = len({frozenset(p) for p in pairs}), len(kept)
    reduction = 100.0 * (n_in - n_out) / n_in if n_in else 0.0
    print(f"axioms\t{n_in} -> {n_out}\t{reduction:.1f}% reduction")
    if not args.dry_run:
        out = _out_dir(args)
        (out / "pruned.nt").write_text(emit_axioms(kept, kb), encoding="utf-8")
    return EXIT_OK


def cmd_eval(args, cfg: Config) -> int:
    gold_path = Path(args.gold) if args.gold else None
    if gold_path is None or not gold_path.is_file():
        raise ConfigError(f"gold file not found: {args.gold}")
    kb = load_ontology(cfg) if cfg.ontology else None
    gold = PairMatrix.read_tsv(gold_path, kb)
    spec = PromptSpec.of(cfg.strategy, cfg.qa_mode)
    if args.dry_run:
        print(f"gold_pairs\t{gold.counts[Label.DISJOINT] + gold.counts[Label.NOT_DISJOINT]}")
        return EXIT_OK
    out = _out_dir(args)
    if cfg.cache_path is None:
        cfg.cache_path = str(out / "eval_transcript.jsonl")
    oracle = make_oracle(cfg, args.mock_gold, gold.kb)
    model = cfg.model_name or ("mock" if args.mock_gold else "")
    rep = report(gold, oracle, spec, meta={"oracle_round_trips": oracle.round_trips})
    write_report(rep, out, model, cfg.strategy, cfg.qa_mode)
    sys.stdout.write(rep.tsv_row(model, cfg.strategy, cfg.qa_mode))
    return EXIT_OK


def cmd_render_prompt(args, cfg: Config) -> int:
    spec = PromptSpec.of(args.strategy, args.qa)
    sys.stdout.write(format_prompt(spec, args.label_a, args.label_b))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", help="random selection seed")
    common.add_argument("--dry-run", action="store_true", help="report the plan, write nothing")
    common.add_argument("-v", "--verbose", action="count", default=0)
    for key in CONFIG_PARSERS:
        if key == "seed":
            continue
        common.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, metavar=key.upper())

    parser = _Parser(prog="disjax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("closure", parents=[common], help="label pairs that follow from the ontology")
    p.add_argument("--decided-only", action="store_true", help="export only non-unknown pairs")
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("enrich", parents=[common], help="resolve unknown pairs with the oracle")
    p.add_argument("--mock-gold", help="answer from a gold pair-matrix TSV instead of an endpoint")
    p.add_argument("--max-verdicts", type=int, help="stop after this many new verdicts (resume later)")
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("prune", parents=[common], help="reduce disjointness axioms to a minimal set")
    p.add_argument("input", help="pair-matrix TSV or N-Triples axiom file")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("eval", parents=[common], help="score the oracle against gold labels")
    p.add_argument("--gold", help="gold pair-matrix TSV")
    p.add_argument("--mock-gold", help="answer from a gold pair-matrix TSV instead of an endpoint")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render-prompt", parents=[common], help="print the prompt for one class pair")
    p.add_argument("strategy")
    p.add_argument("qa")
    p.add_argument("label_a")
    p.add_argument("label_b")
    p.set_defaults(func=cmd_render_prompt)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = build_config(file_values, overrides)
        return args.func(args, cfg)
    except (ConfigError, ValidationError, LoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (InvariantViolation, DisjaxError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
