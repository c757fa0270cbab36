import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialcoref.doc_model import CONLL, UA, ClusterSet, Corpus, Span, make_document
from dialcoref.format_io import (CONLL_SCHEMA, UA_SCHEMA, ColumnSchema, ParseError, dropped_layers,
                                 from_interchange, parse, parse_brackets, read_corpus, serialize,
                                 to_interchange, write_corpus)
from oracles import random_document

UA_TEXT = """#begin document dlg 1
dlg\t0\tI\tA\t(1)\t-
dlg\t1\tsaw\tA\t-\t-
dlg\t2\tthe\tA\t(2\t-
dlg\t3\ttruck\tA\t2)\t-

dlg\t0\tit\tB\t-\t(1)
dlg\t1\trains\tB\t-\t-

dlg\t0\tyou\t-\t(1)\t-
#end document
"""


def test_parse_ua_example():
    corpus = parse(UA_TEXT, UA_SCHEMA, name="toy")
    (doc,) = corpus.documents
    assert doc.doc_id == "dlg 1"
    assert doc.words == ["I", "saw", "the", "truck", "it", "rains", "you"]
    assert [s.speaker for s in doc.sentences] == ["A", "B", None]
    assert doc.gold_clusters == ClusterSet([[Span(0, 0), Span(6, 6)], [Span(2, 3)]])
    assert doc.non_referring == {Span(4, 4)}
    assert doc.is_dialogue


@pytest.mark.parametrize("cell, items", [
    ("-", []),
    ("(3)", [("single", "3")]),
    ("(1|2)|(3)", [("open", "1"), ("close", "2"), ("single", "3")]),
])
def test_parse_brackets(cell, items):
    assert parse_brackets(cell) == items


def test_nested_same_id_brackets():
    text = "#begin document d\n" + "\n".join(
        f"d\t{k}\tw{k}\t-\t{c}" for k, c in enumerate(["(1", "(1)", "1)"])) + "\n#end document\n"
    (doc,) = parse(text, CONLL_SCHEMA).documents
    # same id, so both spans belong to one cluster
    assert doc.gold_clusters == ClusterSet([[Span(0, 2), Span(1, 1)]])


@pytest.mark.parametrize("body, message", [
    ("d\t0\ta\t-\t(1\t-\n", "unclosed"),
    ("d\t0\ta\t-\t1)\t-\n", "without an opening"),
    ("d\t0\ta\t-\t-\t-\nd\t2\tb\t-\t-\t-\n", "breaks sequence"),
    ("d\t0\ta\tA\t-\t-\nd\t1\tb\tB\t-\t-\n", "speaker changes"),
    ("d\t0\ta\n", "expected 6 columns"),
    ("d\t0\ta\t-\t(x\t-\n", "unclosed"),
    ("d\t0\ta\t-\t((1\t-\n", "malformed"),
])
def test_parse_errors_carry_line_numbers(body, message):
    text = "#begin document d\n" + body + "#end document\n"
    with pytest.raises(ParseError, match=message) as err:
        parse(text, UA_SCHEMA, source="f.ua")
    assert err.value.source == "f.ua"
    assert err.value.line is not None and err.value.line >= 2


def test_duplicate_doc_id_and_unterminated():
    one = "#begin document d\nd\t0\ta\t-\t-\t-\n#end document\n"
    with pytest.raises(ParseError, match="duplicate"):
        parse(one + one)
    with pytest.raises(ParseError, match="not terminated"):
        parse("#begin document d\nd\t0\ta\t-\t-\t-\n")


def test_custom_column_layout():
    schema = ColumnSchema(CONLL, doc_id=0, token_index=2, token_text=3, speaker=9, coref=10,
                          non_referring=None)
    row = ["d", "x", "0", "Hello"] + ["-"] * 5 + ["A", "(7)"]
    (doc,) = parse("#begin document d\n" + "\t".join(row) + "\n#end document\n", schema).documents
    assert doc.words == ["Hello"]
    assert doc.sentences[0].speaker == "A"
    assert doc.gold_clusters == ClusterSet([[Span(0, 0)]])
    with pytest.raises(ValueError):
        ColumnSchema(CONLL, non_referring=5)
    with pytest.raises(ValueError):
        ColumnSchema(UA, coref=3)


def test_serialize_rejects_unwritable_documents():
    bad = make_document("d", [["a", "b"]], ["two words"], clusters=[[(0, 0)]])
    with pytest.raises(ValueError, match="speaker"):
        serialize(Corpus("c", (bad,)))
    crossing = make_document("d", [["a", "b", "c"]], clusters=[[(0, 1), (1, 2)]])
    with pytest.raises(ValueError):
        serialize(Corpus("c", (crossing,)))


def test_conll_drops_non_referring_with_count():
    doc = make_document("d", [["it", "rains", "it", "pours"]], ["A"], clusters=[],
                        non_referring=[(0, 0), (2, 2)])
    corpus = Corpus("c", (doc,), UA)
    assert dropped_layers(corpus, CONLL_SCHEMA) == {"non_referring": 2}
    assert dropped_layers(corpus, UA_SCHEMA) == {"non_referring": 0}
    back = parse(serialize(corpus, CONLL_SCHEMA), CONLL_SCHEMA, name="c").documents[0]
    assert back.non_referring == frozenset()


def test_empty_document_round_trip():
    corpus = Corpus("c", (make_document("empty", [], clusters=[]),), UA)
    assert parse(serialize(corpus), UA_SCHEMA, name="c") == corpus


def _round_trip(corpus, schema):
    return parse(serialize(corpus, schema), schema, name=corpus.name)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([UA, CONLL]))
def test_column_round_trip_property(seed, tag):
    rng = np.random.default_rng(seed)
    docs = [random_document(rng, f"doc{k}", with_nonref=tag == UA) for k in range(3)]
    corpus = Corpus("c", tuple(docs), tag)
    schema = ColumnSchema.for_format(tag)
    assert _round_trip(corpus, schema) == corpus


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_interchange_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    docs = [random_document(rng, f"doc {k}") for k in range(3)]
    corpus = Corpus("c", tuple(docs), UA)
    assert from_interchange(to_interchange(corpus)) == corpus


def test_interchange_version_check():
    text = to_interchange(Corpus("c", (make_document("d", [["a"]]),)))
    header, rest = text.split("\n", 1)
    head = json.loads(header)
    head["version"] = 99
    with pytest.raises(ParseError, match="version"):
        from_interchange(json.dumps(head) + "\n" + rest)


def test_read_write_by_extension(tmp_path):
    corpus = Corpus("toy", (random_document(np.random.default_rng(3), "d", with_nonref=False),), UA)
    for name in ("x.ua", "x.jsonl"):
        write_corpus(corpus, tmp_path / name)
        assert read_corpus(tmp_path / name, name="toy") == corpus
    write_corpus(corpus, tmp_path / "x.conll")
    back = read_corpus(tmp_path / "x.conll", name="toy")
    assert back.format_tag == CONLL
    assert back.documents == corpus.documents
