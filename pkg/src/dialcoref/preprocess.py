"""Document transforms applied before training and inference."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .doc_model import ClusterSet, Corpus, Document, Sentence, Span, Token

log = logging.getLogger(__name__)

DEFAULT_MAX_SEGMENT_TOKENS = 512
DEFAULT_MAX_SEGMENTS = 3
DEFAULT_EPOCHS = 20


def speaker_token(k: int) -> str:
    return f"[SPK{k}]"


def strip_non_referring(doc: Document) -> Document:
    """Forget non-referring marks; those spans become ordinary non-mentions."""
    if not doc.non_referring:
        return doc
    return doc.replace(non_referring=frozenset())


class SpeakerVocabulary(dict):
    """Ordered map from speaker label to its ``[SPKk]`` token, k from 1."""

    @classmethod
    def from_document(cls, doc: Document) -> "SpeakerVocabulary":
        vocab = cls()
        for speaker in doc.speakers():
            vocab[speaker] = speaker_token(len(vocab) + 1)
        return vocab


def augment_speakers(doc: Document, allowed_tokens=None) -> tuple[Document, SpeakerVocabulary]:
    """Prepend a speaker token to every sentence with a known speaker.

    Speakers are numbered by first appearance.  All spans are shifted so
    they stay on their original tokens.  When ``allowed_tokens`` is given,
    speakers whose token is not in it are left unmarked.
    """
    vocab = SpeakerVocabulary.from_document(doc)
    if allowed_tokens is not None:
        unknown = [s for s, tok in vocab.items() if tok not in allowed_tokens]
        if unknown:
            log.warning("%s: %d speaker(s) beyond the trained speaker vocabulary; "
                        "treating them as unknown", doc.doc_id, len(unknown))
            for s in unknown:
                del vocab[s]
    if not vocab:
        return doc, vocab

    tokens, sentences = [], []
    shift = np.zeros(len(doc.tokens), dtype=np.int64)
    for sent in doc.sentences:
        start = len(tokens)
        if sent.speaker in vocab:
            tokens.append(Token(vocab[sent.speaker], start, is_speaker=True))
        offset = len(tokens) - sent.start
        shift[sent.start:sent.end] = offset
        for k in range(sent.start, sent.end):
            old = doc.tokens[k]
            tokens.append(Token(old.text, k + offset, old.is_speaker))
        sentences.append(Sentence(start, len(tokens), sent.speaker))

    def move(span: Span) -> Span:
        return Span(span.start + int(shift[span.start]), span.end + int(shift[span.end]))

    gold = doc.gold_clusters.map_spans(move) if doc.gold_clusters is not None else None
    out = doc.replace(tokens=tuple(tokens), sentences=tuple(sentences), gold_clusters=gold,
                      non_referring=frozenset(move(s) for s in doc.non_referring))
    return out, vocab


def original_positions(doc: Document) -> list[int]:
    """Map each token to its index with speaker tokens removed (-1 for speaker tokens)."""
    out, k = [], 0
    for tok in doc.tokens:
        if tok.is_speaker:
            out.append(-1)
        else:
            out.append(k)
            k += 1
    return out


def remove_speaker_tokens(doc: Document) -> Document:
    """Inverse of :func:`augment_speakers`."""
    if not any(t.is_speaker for t in doc.tokens):
        return doc
    pos = original_positions(doc)
    tokens = tuple(Token(t.text, pos[t.index]) for t in doc.tokens if not t.is_speaker)
    sentences = []
    for sent in doc.sentences:
        kept = [pos[k] for k in range(sent.start, sent.end) if pos[k] >= 0]
        sentences.append(Sentence(kept[0], kept[-1] + 1, sent.speaker))

    def move(span):
        return Span(pos[span.start], pos[span.end])

    gold = doc.gold_clusters.map_spans(move) if doc.gold_clusters is not None else None
    return doc.replace(tokens=tokens, sentences=tuple(sentences), gold_clusters=gold,
                       non_referring=frozenset(move(s) for s in doc.non_referring))


def _annotated_spans(doc: Document):
    spans = set(doc.non_referring)
    if doc.gold_clusters is not None:
        spans |= doc.gold_clusters.mentions
    return spans


def pack_segments(doc: Document, max_segment_tokens: int) -> list[tuple[int, int]]:
    """Greedily pack whole sentences into segments of at most ``max_segment_tokens``.

    Returns sentence-index ranges ``(first, stop)``.  A boundary that would
    cut an annotated span is moved back to an earlier sentence boundary.
    """
    for k, sent in enumerate(doc.sentences):
        if len(sent) > max_segment_tokens:
            raise ValueError(f"{doc.doc_id}: sentence {k} has {len(sent)} tokens, "
                             f"more than max_segment_tokens={max_segment_tokens}")
    spans = _annotated_spans(doc)

    def cuts_span(token_boundary):
        return any(s.start < token_boundary <= s.end for s in spans)

    segments = []
    first = 0
    n = len(doc.sentences)
    while first < n:
        stop = first
        size = 0
        while stop < n and size + len(doc.sentences[stop]) <= max_segment_tokens:
            size += len(doc.sentences[stop])
            stop += 1
        if stop < n:
            while stop > first and cuts_span(doc.sentences[stop].start):
                stop -= 1
            if stop == first:
                raise ValueError(f"{doc.doc_id}: no segment boundary near sentence {first} "
                                 "avoids cutting an annotated span")
        segments.append((first, stop))
        first = stop
    return segments


def split_document(doc: Document, max_segment_tokens: int = DEFAULT_MAX_SEGMENT_TOKENS,
                   max_segments: int = DEFAULT_MAX_SEGMENTS) -> list[Document]:
    """Cut a long document into child documents of at most ``max_segments`` segments.

    Gold clusters are restricted to each child, which drops coreference links
    between children.
    """
    if max_segments < 1:
        raise ValueError("max_segments must be at least 1")
    segments = pack_segments(doc, max_segment_tokens)
    if len(segments) <= max_segments:
        return [doc]
    children = []
    dropped_links = 0
    for c, k in enumerate(range(0, len(segments), max_segments)):
        group = segments[k:k + max_segments]
        s_first, s_stop = group[0][0], group[-1][1]
        lo = doc.sentences[s_first].start
        hi = doc.sentences[s_stop - 1].end

        def inside(span, lo=lo, hi=hi):
            return lo <= span.start and span.end < hi

        tokens = tuple(Token(t.text, t.index - lo, t.is_speaker) for t in doc.tokens[lo:hi])
        sentences = tuple(Sentence(s.start - lo, s.end - lo, s.speaker)
                          for s in doc.sentences[s_first:s_stop])
        gold = None
        if doc.gold_clusters is not None:
            gold = doc.gold_clusters.restricted(inside).map_spans(lambda s, lo=lo: s.shifted(-lo))
        nonref = frozenset(s.shifted(-lo) for s in doc.non_referring if inside(s))
        children.append(Document(f"{doc.doc_id}#{c}", tokens, sentences, doc.is_dialogue,
                                 gold, nonref))
    if doc.gold_clusters is not None:
        parts = sum(len(ch.gold_clusters) for ch in children)
        dropped_links = parts - len(doc.gold_clusters)
        if dropped_links:
            log.info("%s: split into %d documents, %d cluster(s) cut across children",
                     doc.doc_id, len(children), dropped_links)
    return children


class TransferMode(str, enum.Enum):
    UAD_ONLY = "uad"
    MIX = "mix"
    PRETRAIN_ADAPT = "pretrain"


@dataclass(frozen=True)
class Phase:
    name: str
    corpora: tuple[Corpus, ...]
    epochs: int

    @property
    def documents(self) -> list[Document]:
        return [d for c in self.corpora for d in c.documents]


@dataclass(frozen=True)
class TrainingSchedule:
    phases: tuple[Phase, ...]
    mode: TransferMode
    seed: int = 0

    def epoch_order(self, phase_index: int, epoch: int) -> list[Document]:
        """Documents of one epoch, shuffled deterministically from the seed."""
        docs = self.phases[phase_index].documents
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(phase_index, epoch)))
        return [docs[k] for k in rng.permutation(len(docs))]

    def iter_epochs(self) -> Iterator[tuple[int, int, list[Document]]]:
        for p, phase in enumerate(self.phases):
            for e in range(phase.epochs):
                yield p, e, self.epoch_order(p, e)


def build_schedule(uad: Sequence[Corpus], od: Sequence[Corpus], mode, epochs: int = DEFAULT_EPOCHS,
                   seed: int = 0) -> TrainingSchedule:
    """Arrange UA-format and other-format corpora into training phases.

    ``uad`` mode trains on the UA corpora alone, ``mix`` trains once on the
    union, and ``pretrain`` trains on the other-format corpora first and then
    on the UA corpora.
    """
    mode = TransferMode(mode)
    uad, od = tuple(uad), tuple(od)
    if not uad or not any(len(c) for c in uad):
        raise ValueError("no UA-format training documents")
    if mode is TransferMode.UAD_ONLY:
        phases = (Phase("uad", uad, epochs),)
    elif mode is TransferMode.MIX:
        phases = (Phase("mix", uad + od, epochs),)
    else:
        if not od:
            raise ValueError("pretrain mode needs at least one other-format corpus")
        phases = (Phase("pretrain-od", od, epochs), Phase("adapt-uad", uad, epochs))
    return TrainingSchedule(phases, mode, seed)
