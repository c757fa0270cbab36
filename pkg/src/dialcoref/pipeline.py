"""End-to-end glue: preprocessing, training and prediction over corpora."""

from __future__ import annotations

import logging
from typing import Sequence

from .config import PipelineConfig
from .decoder import decode
from .doc_model import ClusterSet, Corpus, Document, Span
from .preprocess import (augment_speakers, build_schedule, original_positions, split_document,
                         strip_non_referring)
from .scorer import ScoreTable, SpanScorer, fit

log = logging.getLogger(__name__)


def prepare_training_corpus(corpus: Corpus, config: PipelineConfig) -> Corpus:
    docs = []
    for doc in corpus.documents:
        doc = strip_non_referring(doc)
        if config.speaker_augment:
            doc, _ = augment_speakers(doc)
        docs.extend(split_document(doc, config.max_segment_tokens, config.max_segments))
    return Corpus(corpus.name, tuple(docs), corpus.format_tag)


def train(uad: Sequence[Corpus], od: Sequence[Corpus], config: PipelineConfig,
          checkpoint_dir=None, on_epoch=None) -> SpanScorer:
    """Preprocess the corpora, build the transfer schedule and fit a scorer."""
    uad = [prepare_training_corpus(c, config) for c in uad]
    od = [prepare_training_corpus(c, config) for c in od]
    schedule = build_schedule(uad, od, config.transfer_mode, config.epochs, config.seed)
    for k, phase in enumerate(schedule.phases):
        log.info("phase %d %s: %d documents x %d epochs", k, phase.name,
                 len(phase.documents), phase.epochs)
    return fit(schedule, config, checkpoint_dir=checkpoint_dir, on_epoch=on_epoch)


def _model_view(model: SpanScorer, doc: Document) -> Document:
    view = doc.replace(gold_clusters=None, non_referring=frozenset())
    if model.config.speaker_augment:
        view, _ = augment_speakers(view, allowed_tokens=model.speaker_tokens)
    return view


def score_document(model: SpanScorer, doc: Document) -> ScoreTable:
    """Score table of ``doc`` with candidates in the document's own coordinates."""
    view = _model_view(model, doc)
    table = model.score(view)
    if view is doc or not any(t.is_speaker for t in view.tokens):
        return table
    pos = original_positions(view)
    cands = tuple(Span(pos[s.start], pos[s.end]) for s in table.candidates)
    return ScoreTable(cands, table.mention_scores, table.antecedent_scores,
                      table.max_antecedents, doc.doc_id)


def predict_document(model: SpanScorer, doc: Document) -> tuple[ClusterSet, ScoreTable]:
    table = score_document(model, doc)
    return decode(table, singletons=model.config.singleton_recognition), table


def predict_corpus(model: SpanScorer, corpus: Corpus, with_tables: bool = False):
    """Replace each document's gold clusters with predicted ones."""
    docs, tables = [], []
    for doc in corpus.documents:
        clusters, table = predict_document(model, doc)
        docs.append(doc.replace(gold_clusters=clusters, non_referring=frozenset()))
        tables.append(table)
    response = Corpus(corpus.name, tuple(docs), corpus.format_tag)
    return (response, tables) if with_tables else response


def evaluate_model(model: SpanScorer, corpus: Corpus, aggregate: str = "micro"):
    from .evaluator import evaluate
    response = predict_corpus(model, corpus)
    pairs = [(k.gold_clusters, r.gold_clusters) for k, r in zip(corpus.documents, response.documents)]
    excludes = [k.non_referring for k in corpus.documents]
    return evaluate(pairs, excludes, aggregate)
