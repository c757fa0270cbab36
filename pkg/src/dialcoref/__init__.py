"""Singleton-aware mention-ranking coreference for dialogue documents."""

from .doc_model import (ClusterSet, Corpus, Document, Sentence, Span, Token, candidate_order,
                        corpus_stats, make_document)

__version__ = "0.1.0"

__all__ = ["ClusterSet", "Corpus", "Document", "Sentence", "Span", "Token", "candidate_order",
           "corpus_stats", "make_document"]
