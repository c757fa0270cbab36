"""Core document types shared by every stage of the pipeline.

All span coordinates are token indices into ``Document.tokens``; a span's
``end`` is inclusive.  Every type here is frozen, so documents can be shared
freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

PERSONAL_PRONOUNS = frozenset(
    "i me my mine you your yours he him his she her hers we us our ours "
    "they them their theirs it its".split()
)

UA = "UA"
CONLL = "CONLL"
FORMAT_TAGS = (UA, CONLL)


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span ({self.start}, {self.end})")

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def crosses(self, other: "Span") -> bool:
        """True when the two spans overlap without one nesting in the other."""
        return (self.start < other.start <= self.end < other.end
                or other.start < self.start <= other.end < self.end)

    def shifted(self, offset: int) -> "Span":
        return Span(self.start + offset, self.end + offset)

    def __repr__(self):
        return f"Span({self.start}, {self.end})"


@dataclass(frozen=True)
class Token:
    text: str
    index: int
    # marks tokens injected by speaker augmentation
    is_speaker: bool = False

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"empty token text at index {self.index}")


@dataclass(frozen=True)
class Sentence:
    start: int
    end: int  # exclusive
    speaker: Optional[str] = None

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"empty sentence [{self.start}, {self.end})")

    def __len__(self):
        return self.end - self.start


def candidate_order(spans: Iterable[Span]) -> list[Span]:
    """Sort spans by start, breaking ties by end."""
    return sorted(set(spans), key=lambda s: (s.start, s.end))


@dataclass(frozen=True)
class ClusterSet:
    """A partition of some mentions into entity clusters.

    Clusters are stored canonically (mentions in candidate order, clusters
    ordered by their first mention), so two cluster sets describing the same
    partition compare equal.
    """

    clusters: tuple[tuple[Span, ...], ...] = ()

    def __init__(self, clusters: Iterable[Iterable[Span]] = ()):
        canon = []
        seen: set[Span] = set()
        for cluster in clusters:
            members = tuple(candidate_order(cluster))
            if not members:
                raise ValueError("empty cluster")
            for m in members:
                if m in seen:
                    raise ValueError(f"mention {m} appears in more than one cluster")
                seen.add(m)
            canon.append(members)
        canon.sort(key=lambda c: (c[0].start, c[0].end))
        object.__setattr__(self, "clusters", tuple(canon))

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def mentions(self) -> frozenset[Span]:
        return frozenset(m for c in self.clusters for m in c)

    def mention_to_cluster(self) -> dict[Span, int]:
        return {m: k for k, c in enumerate(self.clusters) for m in c}

    def singletons(self) -> list[Span]:
        return [c[0] for c in self.clusters if len(c) == 1]

    def restricted(self, keep) -> "ClusterSet":
        """Drop mentions for which ``keep(span)`` is false, and emptied clusters."""
        out = []
        for c in self.clusters:
            kept = [m for m in c if keep(m)]
            if kept:
                out.append(kept)
        return ClusterSet(out)

    def map_spans(self, fn) -> "ClusterSet":
        return ClusterSet([[fn(m) for m in c] for c in self.clusters])


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[Token, ...]
    sentences: tuple[Sentence, ...]
    is_dialogue: bool = False
    gold_clusters: Optional[ClusterSet] = None
    non_referring: frozenset[Span] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "non_referring", frozenset(self.non_referring))
        for i, tok in enumerate(self.tokens):
            if tok.index != i:
                raise ValueError(f"{self.doc_id}: token indices not contiguous at {i}")
        pos = 0
        for sent in self.sentences:
            if sent.start != pos:
                raise ValueError(f"{self.doc_id}: sentences do not tile the document at token {pos}")
            pos = sent.end
        if pos != len(self.tokens):
            raise ValueError(f"{self.doc_id}: sentences cover {pos} of {len(self.tokens)} tokens")
        T = len(self.tokens)
        gold = self.gold_clusters.mentions if self.gold_clusters is not None else frozenset()
        for span in gold | self.non_referring:
            if span.end >= T:
                raise ValueError(f"{self.doc_id}: span {span} outside document of {T} tokens")
        both = gold & self.non_referring
        if both:
            raise ValueError(f"{self.doc_id}: spans both referring and non-referring: {sorted(both)}")

    def __len__(self):
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.text for t in self.tokens]

    def sentence_index(self) -> list[int]:
        """Sentence number of every token."""
        out = []
        for k, sent in enumerate(self.sentences):
            out.extend([k] * len(sent))
        return out

    def speakers(self) -> list[str]:
        """Distinct known speakers in order of first appearance."""
        seen = []
        for sent in self.sentences:
            if sent.speaker is not None and sent.speaker not in seen:
                seen.append(sent.speaker)
        return seen

    def replace(self, **changes) -> "Document":
        fields = dict(doc_id=self.doc_id, tokens=self.tokens, sentences=self.sentences,
                      is_dialogue=self.is_dialogue, gold_clusters=self.gold_clusters,
                      non_referring=self.non_referring)
        fields.update(changes)
        return Document(**fields)


def make_document(doc_id: str, sentences: list[list[str]], speakers=None, is_dialogue=None,
                  clusters=None, non_referring=()) -> Document:
    """Build a document from tokenized sentences.

    ``clusters`` is a list of lists of ``(start, end)`` pairs in document
    token coordinates.
    """
    tokens, sents = [], []
    speakers = speakers or [None] * len(sentences)
    for words, spk in zip(sentences, speakers):
        start = len(tokens)
        tokens.extend(Token(w, start + k) for k, w in enumerate(words))
        sents.append(Sentence(start, len(tokens), spk))
    if is_dialogue is None:
        is_dialogue = any(s is not None for s in speakers)
    gold = None
    if clusters is not None:
        gold = ClusterSet([[Span(*m) for m in c] for c in clusters])
    return Document(doc_id, tuple(tokens), tuple(sents), is_dialogue, gold,
                    frozenset(Span(*m) for m in non_referring))


@dataclass(frozen=True)
class Corpus:
    name: str
    documents: tuple[Document, ...] = ()
    format_tag: str = UA

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        if self.format_tag not in FORMAT_TAGS:
            raise ValueError(f"unknown format tag {self.format_tag!r}")
        ids = [d.doc_id for d in self.documents]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate doc_id in corpus {self.name!r}: {dupes}")

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)


@dataclass(frozen=True)
class CorpusStats:
    name: str
    documents: int
    mentions: int
    clusters: int
    singletons: int
    singleton_pct: float
    pronoun_mentions: int
    pronoun_pct: float
    avg_speakers: float

    def as_row(self) -> list[str]:
        return [self.name, str(self.documents), str(self.mentions), str(self.clusters),
                f"{self.singletons} ({self.singleton_pct:.1f}%)",
                f"{self.pronoun_mentions} ({self.pronoun_pct:.1f}%)",
                f"{self.avg_speakers:.1f}"]


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Count documents, mentions, clusters, singletons and pronoun mentions.

    Non-referring spans are never part of gold clusters, so they are excluded
    from every count.  Percentages of an empty denominator are reported as 0.
    """
    n_mentions = n_clusters = n_single = n_pron = n_speakers = 0
    for doc in corpus.documents:
        if doc.gold_clusters is None:
            raise ValueError(f"{corpus.name}/{doc.doc_id}: no gold annotation")
        words = doc.words
        for cluster in doc.gold_clusters:
            n_clusters += 1
            n_mentions += len(cluster)
            if len(cluster) == 1:
                n_single += 1
            n_pron += sum(1 for m in cluster
                          if m.width == 1 and words[m.start].lower() in PERSONAL_PRONOUNS)
        n_speakers += len(doc.speakers())
    n_docs = len(corpus.documents)
    return CorpusStats(
        name=corpus.name,
        documents=n_docs,
        mentions=n_mentions,
        clusters=n_clusters,
        singletons=n_single,
        singleton_pct=100.0 * n_single / n_clusters if n_clusters else 0.0,
        pronoun_mentions=n_pron,
        pronoun_pct=100.0 * n_pron / n_mentions if n_mentions else 0.0,
        avg_speakers=n_speakers / n_docs if n_docs else 0.0,
    )
