import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disjax.errors import ParseError
from disjax.model import label_of
from disjax.ntriples import BNode, IRI, Literal, ParseReport, parse_file, parse_line, parse_text

SUB = "<http://www.w3.org/2000/01/rdf-schema#subClassOf>"
DIS = "<http://www.w3.org/2002/07/owl#disjointWith>"
TYPE = "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>"
LABEL = "<http://www.w3.org/2000/01/rdf-schema#label>"
CLASS = "<http://www.w3.org/2002/07/owl#Class>"


def iri_pairs(kb, pairs):
    return {tuple(sorted(kb.iri(c) for c in p)) for p in pairs}


def test_subclass_triple():
    kb = parse_text(f"<http://ex/Dolphin> {SUB} <http://ex/Mammal> .\n")
    d, m = kb.lookup("http://ex/Dolphin"), kb.lookup("http://ex/Mammal")
    assert kb.subclass_edges == {(d, m)}


def test_disjoint_triple_is_unordered():
    kb = parse_text(f"<http://ex/Fish> {DIS} <http://ex/Mammal> .\n")
    assert iri_pairs(kb, kb.asserted_disjoint) == {("http://ex/Fish", "http://ex/Mammal")}


def test_missing_object_reports_line():
    text = f"<http://ex/A> {SUB} <http://ex/B> .\n<a:a> <b:b> .\n"
    with pytest.raises(ParseError) as err:
        parse_text(text)
    assert err.value.line == 2
    assert err.value.column == 13


def test_unterminated_literal():
    with pytest.raises(ParseError, match="unterminated literal") as err:
        parse_text(f'<http://ex/A> {LABEL} "Person .\n')
    assert err.value.line == 1


@pytest.mark.parametrize(
    "line",
    [
        "<http://ex/A> <http://ex/p> <http://ex/B>",  # no dot
        "<http://ex/A> <http://ex/p> <http://ex/B> . junk",
        '"lit" <http://ex/p> <http://ex/B> .',
        "<http://ex/A> _:p <http://ex/B> .",
        "<http://ex/A B> <http://ex/p> <http://ex/B> .",
        '<http://ex/A> <http://ex/p> "x"@ .',
        '<http://ex/A> <http://ex/p> "bad \\q escape" .',
        "<relative> <http://ex/p> <http://ex/B> .",
    ],
)
def test_malformed_lines(line):
    with pytest.raises(ParseError):
        parse_line(line, 7)


def test_parse_line_terms():
    t = parse_line('_:x <http://ex/p> "caf\\u00E9"@fr . # trailing comment')
    assert isinstance(t.subject, BNode)
    assert t.object == Literal("café", lang="fr")
    t = parse_line('<http://ex/a> <http://ex/p> "3"^^<http://www.w3.org/2001/XMLSchema#int> .')
    assert isinstance(t.subject, IRI)
    assert t.object.datatype.endswith("#int")
    assert parse_line("   # only a comment") is None
    assert parse_line("") is None


def test_iri_unicode_escape():
    t = parse_line("<http://ex/caf\\u00E9> <http://ex/p> <http://ex/b> .")
    assert t.subject == "http://ex/café"


def test_late_class_declaration_still_types_instances():
    text = (
        f"<http://ex/e1> {TYPE} <http://ex/Museum> .\n"
        f"<http://ex/e1> {TYPE} <http://ex/Unrelated> .\n"
        f"<http://ex/Museum> {TYPE} {CLASS} .\n"
    )
    report = ParseReport()
    kb = parse_text(text, report=report)
    assert kb.instance_types == {"http://ex/e1": {kb.lookup("http://ex/Museum")}}
    assert report.dropped_typings == 1


def test_blank_nodes_and_literal_objects_are_skipped(toy_nt):
    report = ParseReport()
    kb = parse_file(toy_nt, report=report)
    assert report.blank_node_statements == 1
    assert report.consumed_total + report.ignored == report.total
    assert len(kb) == 11
    assert iri_pairs(kb, kb.asserted_disjoint) == {
        ("http://example.org/zoo/Fish", "http://example.org/zoo/Mammal"),
        ("http://example.org/zoo/Animal", "http://example.org/zoo/Place"),
    }
    assert label_of(kb, kb.lookup("http://example.org/zoo/Animal")) == "animal"
    data = json.loads(report.to_json())
    assert data["total_triples"] == report.total
    assert data["consumed"]["subclass"] == 10


def test_literal_object_for_subclass_is_semantic_error():
    report = ParseReport()
    kb = parse_text(f'<http://ex/A> {SUB} "B" .\n<http://ex/A> {DIS} <http://ex/A> .\n', report=report)
    assert len(report.semantic_errors) == 2
    assert [e["line"] for e in report.semantic_errors] == [1, 2]
    assert not kb.subclass_edges and not kb.asserted_disjoint


def test_byte_stream_and_crlf():
    lines = [f"<http://ex/A> {SUB} <http://ex/B> .\r\n".encode()]
    from disjax.ntriples import parse_ntriples

    kb = parse_ntriples(lines)
    assert len(kb.subclass_edges) == 1


def test_invalid_utf8():
    from disjax.ntriples import parse_ntriples

    with pytest.raises(ParseError) as err:
        parse_ntriples([b"<http://ex/A> <http://ex/p> \"\xff\" .\n"])
    assert err.value.line == 1


def _random_lines(rng):
    lines = []
    names = [f"http://ex/C{i}" for i in range(6)]
    for _ in range(rng.randint(0, 15)):
        a, b = rng.sample(names, 2)
        kind = rng.randrange(5)
        if kind == 0:
            lines.append(f"<{a}> {SUB} <{b}> .")
        elif kind == 1:
            lines.append(f"<{a}> {DIS} <{b}> .")
        elif kind == 2:
            lines.append(f"<http://ex/i{rng.randrange(3)}> {TYPE} <{a}> .")
        elif kind == 3:
            lines.append(f'<{a}> {LABEL} "L{rng.randrange(3)}"@en .')
        else:
            lines.append(f"<{a}> {TYPE} {CLASS} .")
    return lines


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.randoms(use_true_random=False))
def test_parsing_is_order_independent(seed, shuffler):
    lines = _random_lines(random.Random(seed))
    shuffled = list(lines)
    shuffler.shuffle(shuffled)
    r1, r2 = ParseReport(), ParseReport()
    kb1 = parse_text("\n".join(lines) + "\n", report=r1)
    kb2 = parse_text("\n".join(shuffled) + "\n", report=r2)
    assert kb1 == kb2
    assert kb1.iris == kb2.iris  # classes are interned in IRI order
    assert r1.consumed_total + r1.ignored == r1.total
