import numpy as np
import pytest

from dialcoref.doc_model import Span, make_document
from dialcoref.preprocess import augment_speakers
from dialcoref.scorer.spans import (DIFFERENT_SPEAKER, SAME_SPEAKER, SPEAKER_UNAVAILABLE,
                                    candidate_budget, distance_bucket, enumerate_spans,
                                    prune_candidates, span_arrays, speaker_relation, width_bucket)
from oracles import brute_force_spans, greedy_prune, random_document


def test_enumeration_examples():
    one = make_document("d", [["a", "b", "c"]])
    assert len(enumerate_spans(one, 30)) == 6
    assert enumerate_spans(one, 1) == [Span(0, 0), Span(1, 1), Span(2, 2)]
    two = make_document("d", [["a", "b"], ["c", "d"]])
    assert len(enumerate_spans(two, 30)) == 6
    with pytest.raises(ValueError):
        enumerate_spans(one, 0)


def test_enumeration_matches_brute_force():
    rng = np.random.default_rng(11)
    for k in range(300):
        doc = random_document(rng, f"d{k}", max_sentences=6, max_len=12)
        if rng.random() < 0.5:
            doc, _ = augment_speakers(doc)
        if len(doc) > 40:
            continue
        width = int(rng.integers(1, 8))
        expected = brute_force_spans(doc, width)
        assert enumerate_spans(doc, width) == expected
        s, e = span_arrays(doc, width)
        assert [Span(int(a), int(b)) for a, b in zip(s, e)] == expected


def test_speaker_tokens_never_bound_a_span():
    doc, _ = augment_speakers(make_document("d", [["hi", "there"]], ["A"]))
    assert all(not doc.tokens[s.start].is_speaker and not doc.tokens[s.end].is_speaker
               for s in enumerate_spans(doc, 30))


@pytest.mark.parametrize("width, bucket", [(1, 0), (4, 3), (5, 4), (7, 4), (8, 5), (15, 5),
                                           (16, 6), (30, 6), (45, 6)])
def test_width_buckets(width, bucket):
    assert width_bucket(width) == bucket


@pytest.mark.parametrize("dist, bucket", [(1, 0), (4, 3), (5, 4), (7, 4), (8, 5), (16, 6),
                                          (31, 6), (32, 7), (63, 7), (64, 8), (500, 8)])
def test_distance_buckets(dist, bucket):
    assert distance_bucket(dist) == bucket


def test_speaker_relation():
    rel = speaker_relation(np.array([0, 0, -1, 2]), np.array([0, 1, 1, -1]))
    assert list(rel) == [SAME_SPEAKER, DIFFERENT_SPEAKER, SPEAKER_UNAVAILABLE, SPEAKER_UNAVAILABLE]


def test_budget_is_ceiling():
    assert candidate_budget(0.5, 10) == 5
    assert candidate_budget(0.5, 11) == 6
    assert candidate_budget(0.4, 5) == 2


def test_prune_examples():
    doc = make_document("d", [[f"w{k}" for k in range(10)]])
    spans = enumerate_spans(doc, 3)[:30]
    assert len(prune_candidates(spans, np.random.default_rng(0).normal(size=30), 0.5, 10)) == 5
    # equal scores: the earliest spans in candidate order (non-crossing ones)
    assert prune_candidates(spans, np.zeros(30), 0.5, 10) == [0, 1, 2, 3, 6]
    # a crossing pair at the top: the lower one is skipped
    pair = [Span(0, 1), Span(1, 2), Span(3, 3)]
    assert prune_candidates(pair, [2.0, 1.0, 0.5], 0.5, 4) == [0, 2]


def test_prune_matches_greedy_oracle():
    rng = np.random.default_rng(5)
    for k in range(300):
        doc = random_document(rng, f"d{k}", max_sentences=5, max_len=10)
        if len(doc) == 0 or len(doc) > 40:
            continue
        spans = enumerate_spans(doc, int(rng.integers(1, 6)))
        # coarse scores produce many ties
        scores = rng.integers(-3, 4, size=len(spans)).astype(float)
        ratio = float(rng.choice([0.2, 0.4, 0.5, 0.75, 1.0]))
        got = prune_candidates(spans, scores, ratio, len(doc))
        assert got == greedy_prune(spans, scores, ratio, len(doc))
        assert got == sorted(got)
        kept = [spans[i] for i in got]
        assert not any(a.crosses(b) for a in kept for b in kept)
