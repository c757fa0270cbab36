"""Generator of small synthetic dialogues with known coreference.

Each dialogue has a host, who speaks first, and two guests.  Names and
object noun phrases corefer when their strings are identical.  ``I`` and
``me`` refer to the current speaker.  ``you`` from a guest refers to the
host, and ``you`` from the host refers to whoever spoke just before.
Telling the host's mentions apart from a guest's therefore needs the
speaker's identity, not just whether two turns share a speaker.  Adverbs
are never mentions, and the expletive ``it`` is marked non-referring.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .doc_model import CONLL, UA, Corpus, Document, make_document

SPEAKER_LABELS = ("anna", "ben", "carl", "dora", "emil", "fay", "gus", "hana", "ivo", "jade",
                  "kurt", "lena")
NAMES = ("Mike", "Lucy", "Omar", "Nina", "Paul", "Rosa", "Sven", "Tara", "Umar", "Vera",
         "Walt", "Xena", "Yuri", "Zoe", "Hugo", "Iris", "Jack", "Kira", "Leon", "Maya")
NOUNS = ("truck", "gym", "building", "car", "book", "house", "garden", "phone", "movie",
         "concert", "store", "park", "bike", "boat", "camera", "kitchen")
VERBS = ("likes", "saw", "visited", "knows", "bought", "called", "met", "loves", "found", "misses")
FIRST_VERBS = ("like", "saw", "visited", "know", "bought", "called", "met", "love", "found", "miss")
ADVERBS = ("really", "slightly", "maybe", "just", "honestly", "probably", "totally")
ADJECTIVES = ("cold", "late", "sunny", "noisy")


class _Builder:
    def __init__(self):
        self.sentences: list[list[str]] = []
        self.speakers: list[Optional[str]] = []
        self.mentions: dict[str, list[tuple[int, int]]] = {}
        self.non_referring: list[tuple[int, int]] = []
        self.n_tokens = 0

    def add(self, speaker, parts):
        """``parts`` is a list of (words, entity-or-None, non_referring)."""
        words = []
        for chunk, entity, nonref in parts:
            start = self.n_tokens + len(words)
            words.extend(chunk)
            span = (start, start + len(chunk) - 1)
            if entity is not None:
                self.mentions.setdefault(entity, []).append(span)
            if nonref:
                self.non_referring.append(span)
        self.sentences.append(words)
        self.speakers.append(speaker)
        self.n_tokens += len(words)


def _dialogue(doc_id: str, rng: np.random.Generator, n_turns: int, n_speakers: int) -> Document:
    labels = list(rng.choice(SPEAKER_LABELS, size=n_speakers, replace=False))
    host = labels[0]
    # third-party entities: names and object phrases, drawn with repetition
    pool = [("name", n) for n in rng.choice(NAMES, size=5, replace=False)]
    pool += [("noun", n) for n in rng.choice(NOUNS, size=5, replace=False)]
    weights = rng.dirichlet(np.full(len(pool), 0.6))

    def third_party():
        kind, word = pool[rng.choice(len(pool), p=weights)]
        entity = f"{kind}:{word}"
        words = [word] if kind == "name" else ["the", word]
        return words, entity, False

    b = _Builder()
    prev = None
    for turn in range(n_turns):
        if turn == 0:
            speaker = host
        else:
            speaker = str(rng.choice([s for s in labels if s != prev]))
        addressee = host if speaker != host else prev
        me = ("I", f"spk:{speaker}")
        adv = ([str(rng.choice(ADVERBS))], None, False)
        verb = str(rng.choice(VERBS))
        fverb = str(rng.choice(FIRST_VERBS))
        options = ["i_obj", "adv_i", "obj_me", "obj_obj"]
        if addressee is not None:
            options += ["you_q", "you_adv", "i_you"]
        if rng.random() < 0.08:
            options = ["expletive"]
        kind = options[rng.integers(len(options))]
        you = (["you"], f"spk:{addressee}", False)
        if kind == "i_obj":
            parts = [(["I"], me[1], False), ([fverb], None, False), third_party(), adv, (["."], None, False)]
        elif kind == "adv_i":
            parts = [adv, (["I"], me[1], False), ([fverb], None, False), third_party(), (["."], None, False)]
        elif kind == "obj_me":
            parts = [third_party(), ([verb], None, False), (["me"], me[1], False), (["."], None, False)]
        elif kind == "obj_obj":
            parts = [third_party(), ([verb], None, False), third_party(), adv, (["."], None, False)]
        elif kind == "you_q":
            parts = [(["did"], None, False), you, ([fverb], None, False), third_party(), (["?"], None, False)]
        elif kind == "you_adv":
            parts = [you, adv, ([fverb], None, False), third_party(), (["!"], None, False)]
        elif kind == "i_you":
            parts = [(["I"], me[1], False), adv, ([fverb], None, False), (["you"], f"spk:{addressee}", False),
                     (["."], None, False)]
        else:
            parts = [(["it"], None, True), (["is"], None, False), adv,
                     ([str(rng.choice(ADJECTIVES))], None, False), (["."], None, False)]
        b.add(speaker, parts)
        prev = speaker

    clusters = [sorted(spans) for spans in b.mentions.values()]
    return make_document(doc_id, b.sentences, b.speakers, True, clusters, b.non_referring)


def synthetic_corpus(n_docs: int, seed: int = 0, name: str = "synthetic", n_turns: int = 10,
                     n_speakers: int = 3, conll_style: bool = False) -> Corpus:
    """Generate ``n_docs`` dialogues.

    ``conll_style`` mimics the other-format corpora: singletons and
    non-referring marks are removed and the format tag is CONLL.
    """
    rng = np.random.default_rng(seed)
    docs = []
    for k in range(n_docs):
        doc = _dialogue(f"{name}_{k:04d}", rng, n_turns, n_speakers)
        if conll_style:
            from .doc_model import ClusterSet
            doc = doc.replace(gold_clusters=ClusterSet(c for c in doc.gold_clusters if len(c) > 1),
                              non_referring=frozenset())
        docs.append(doc)
    return Corpus(name, tuple(docs), CONLL if conll_style else UA)
