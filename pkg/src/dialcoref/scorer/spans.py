"""Span enumeration, pruning and the bucketed pair features."""

from __future__ import annotations

import math

import numpy as np

from ..doc_model import Document, Span

# width buckets {1,2,3,4,5-7,8-15,16-30}; wider spans share the last bucket
WIDTH_BUCKET_EDGES = (1, 2, 3, 4, 5, 8, 16)
# antecedent distance buckets {1,2,3,4,5-7,8-15,16-31,32-63,64+}
DISTANCE_BUCKET_EDGES = (1, 2, 3, 4, 5, 8, 16, 32, 64)

SAME_SPEAKER, DIFFERENT_SPEAKER, SPEAKER_UNAVAILABLE = 0, 1, 2


def width_bucket(width):
    return np.searchsorted(WIDTH_BUCKET_EDGES, width, side="right") - 1


def distance_bucket(distance):
    return np.searchsorted(DISTANCE_BUCKET_EDGES, distance, side="right") - 1


def speaker_relation(speaker_a, speaker_b):
    """Ternary speaker feature; speakers are ints with -1 for unknown."""
    a = np.asarray(speaker_a)
    b = np.asarray(speaker_b)
    out = np.where(a == b, SAME_SPEAKER, DIFFERENT_SPEAKER)
    return np.where((a < 0) | (b < 0), SPEAKER_UNAVAILABLE, out)


def enumerate_spans(doc: Document, max_width: int) -> list[Span]:
    """All spans up to ``max_width`` tokens inside one sentence.

    Spans never start or end on an injected speaker token.
    """
    if max_width < 1:
        raise ValueError("max_width must be at least 1")
    spans = []
    is_spk = [t.is_speaker for t in doc.tokens]
    for sent in doc.sentences:
        for start in range(sent.start, sent.end):
            if is_spk[start]:
                continue
            for end in range(start, min(sent.end, start + max_width)):
                if not is_spk[end]:
                    spans.append(Span(start, end))
    return spans


def span_arrays(doc: Document, max_width: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`enumerate_spans`: (starts, ends) in candidate order."""
    starts, ends = [], []
    is_spk = np.array([t.is_speaker for t in doc.tokens], dtype=bool)
    for sent in doc.sentences:
        n = len(sent)
        w = min(n, max_width)
        s = np.repeat(np.arange(sent.start, sent.end), w)
        e = s + np.tile(np.arange(w), n)
        keep = e < sent.end
        starts.append(s[keep])
        ends.append(e[keep])
    if not starts:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    starts = np.concatenate(starts)
    ends = np.concatenate(ends)
    if is_spk.any():
        keep = ~is_spk[starts] & ~is_spk[ends]
        starts, ends = starts[keep], ends[keep]
    return starts, ends


def candidate_budget(ratio: float, n_tokens: int) -> int:
    return int(math.ceil(ratio * n_tokens - 1e-9))


def prune_candidates(spans, mention_scores, ratio: float, n_tokens: int) -> list[int]:
    """Indices of the top ``ceil(ratio * n_tokens)`` spans by mention score.

    ``spans`` must be in candidate order; ties in score go to the earlier
    span.  A span crossing an already selected span is skipped.  The result
    is in candidate order.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    if isinstance(spans, tuple) and len(spans) == 2 and isinstance(spans[0], np.ndarray):
        starts, ends = spans
    else:
        starts = np.array([s.start for s in spans], dtype=np.int64)
        ends = np.array([s.end for s in spans], dtype=np.int64)
    scores = np.asarray(mention_scores, dtype=float)
    budget = min(len(starts), candidate_budget(ratio, n_tokens))
    if budget <= 0:
        return []
    # stable sort on -score keeps candidate order among ties
    order = np.argsort(-scores, kind="stable")
    sel_s = np.empty(budget, np.int64)
    sel_e = np.empty(budget, np.int64)
    chosen = []
    for k in order:
        s, e = starts[k], ends[k]
        m = len(chosen)
        if m:
            ss, ee = sel_s[:m], sel_e[:m]
            if np.any(((s < ss) & (ss <= e) & (e < ee)) | ((ss < s) & (s <= ee) & (ee < e))):
                continue
        sel_s[m] = s
        sel_e[m] = e
        chosen.append(int(k))
        if len(chosen) == budget:
            break
    return sorted(chosen)
