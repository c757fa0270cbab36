import logging

import numpy as np
import pytest

from dialcoref.doc_model import ClusterSet, Corpus, Span, make_document
from dialcoref.preprocess import (TransferMode, augment_speakers, build_schedule, original_positions,
                                  pack_segments, remove_speaker_tokens, speaker_token, split_document,
                                  strip_non_referring)
from oracles import random_document


def _dialogue():
    return make_document("d", [["I", "saw", "Mike"], ["you", "did"], ["Mike", "left"]],
                         ["ann", "bob", "ann"], clusters=[[(2, 2), (5, 5)], [(0, 0), (3, 3)]],
                         non_referring=[(4, 4)])


def test_augment_inserts_numbered_tokens_and_shifts_spans():
    doc, vocab = augment_speakers(_dialogue())
    assert dict(vocab) == {"ann": "[SPK1]", "bob": "[SPK2]"}
    assert doc.words == ["[SPK1]", "I", "saw", "Mike", "[SPK2]", "you", "did",
                         "[SPK1]", "Mike", "left"]
    assert [t.is_speaker for t in doc.tokens].count(True) == 3
    assert doc.gold_clusters == ClusterSet([[Span(3, 3), Span(8, 8)], [Span(1, 1), Span(5, 5)]])
    assert doc.non_referring == {Span(6, 6)}


def test_augment_is_invertible_on_random_documents():
    rng = np.random.default_rng(0)
    for k in range(200):
        doc = random_document(rng, f"d{k}")
        aug, _ = augment_speakers(doc)
        assert remove_speaker_tokens(aug) == doc
        pos = original_positions(aug)
        assert [p for p in pos if p >= 0] == list(range(len(doc)))


def test_augment_without_speakers_is_identity():
    doc = make_document("d", [["a", "b"]], clusters=[[(0, 1)]])
    assert augment_speakers(doc)[0] is doc


def test_unknown_speakers_are_left_unmarked(caplog):
    doc = make_document("d", [["a"], ["b"], ["c"]], ["x", "y", "z"], clusters=[])
    with caplog.at_level(logging.WARNING):
        aug, vocab = augment_speakers(doc, allowed_tokens={speaker_token(1), speaker_token(2)})
    assert aug.words == ["[SPK1]", "a", "[SPK2]", "b", "c"]
    assert "beyond the trained speaker vocabulary" in caplog.text


def test_strip_non_referring():
    doc = strip_non_referring(_dialogue())
    assert doc.non_referring == frozenset()
    assert doc.gold_clusters == _dialogue().gold_clusters


def _long_document(n_sent=12, length=10):
    sents = [[f"w{s}_{k}" for k in range(length)] for s in range(n_sent)]
    clusters = [[(s * length, s * length) for s in range(n_sent)]]
    return make_document("long", sents, ["A"] * n_sent, clusters=clusters)


def test_pack_segments_is_greedy():
    doc = _long_document()
    assert pack_segments(doc, 25) == [(0, 2), (2, 4), (4, 6), (6, 8), (8, 10), (10, 12)]
    assert pack_segments(doc, 1000) == [(0, 12)]
    with pytest.raises(ValueError):
        pack_segments(doc, 5)


def test_split_document_children():
    doc = _long_document()
    assert split_document(doc, 1000, 3) == [doc]
    children = split_document(doc, 20, 3)
    assert [c.doc_id for c in children] == ["long#0", "long#1"]
    assert [len(c) for c in children] == [60, 60]
    # the single cluster is cut in two; each child keeps its own mentions
    assert [len(c.gold_clusters.mentions) for c in children] == [6, 6]
    assert children[1].words[0] == "w6_0"


def _corpus(name, n):
    return Corpus(name, tuple(make_document(f"{name}{k}", [["a"]], clusters=[]) for k in range(n)))


def test_schedules():
    uad, od = [_corpus("u", 3)], [_corpus("o", 2)]
    s = build_schedule(uad, od, "uad", epochs=4, seed=1)
    assert [p.name for p in s.phases] == ["uad"] and len(s.phases[0].documents) == 3
    s = build_schedule(uad, od, TransferMode.MIX, epochs=4)
    assert len(s.phases[0].documents) == 5
    s = build_schedule(uad, od, "pretrain", epochs=4)
    assert [p.name for p in s.phases] == ["pretrain-od", "adapt-uad"]
    assert [p.epochs for p in s.phases] == [4, 4]
    with pytest.raises(ValueError):
        build_schedule(uad, [], "pretrain")
    with pytest.raises(ValueError):
        build_schedule([], od, "mix")
    with pytest.raises(ValueError):
        build_schedule(uad, od, "bogus")


def test_epoch_order_is_seeded():
    uad = [_corpus("u", 20)]
    a = build_schedule(uad, [], "uad", epochs=3, seed=7)
    b = build_schedule(uad, [], "uad", epochs=3, seed=7)
    ids = lambda s, e: [d.doc_id for d in s.epoch_order(0, e)]
    assert ids(a, 0) == ids(b, 0)
    assert ids(a, 0) != ids(a, 1)
    assert sorted(ids(a, 2)) == sorted(d.doc_id for d in uad[0].documents)
