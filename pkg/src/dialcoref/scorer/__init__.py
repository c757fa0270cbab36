"""Trainable span scorer: enumeration, pruning, scoring, losses and training."""

from .embeddings import HashEmbeddings, LearnedEmbeddings
from .losses import coref_loss, mention_loss, sample_negatives, total_loss
from .model import NonFiniteError, SpanScorer
from .spans import candidate_budget, enumerate_spans, prune_candidates
from .table import ScoreTable, pair_score, read_tables, write_tables
from .train import TrainingDiverged, fit, load_checkpoint, save_checkpoint

__all__ = [
    "HashEmbeddings", "LearnedEmbeddings", "NonFiniteError", "ScoreTable", "SpanScorer",
    "TrainingDiverged", "candidate_budget", "coref_loss", "enumerate_spans", "fit",
    "load_checkpoint", "mention_loss", "pair_score", "prune_candidates", "read_tables",
    "sample_negatives", "save_checkpoint", "total_loss", "write_tables",
]
