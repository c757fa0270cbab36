"""Training objectives: antecedent marginal likelihood and mention cross-entropy."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


def _logsumexp_rows(x):
    m = np.max(x, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return (m + np.log(np.sum(np.exp(x - m), axis=1, keepdims=True)))[:, 0]


def coref_loss(logits: np.ndarray, gold: np.ndarray):
    """Negative marginal log-likelihood of the gold antecedents.

    ``logits`` is (n, K+1) with the dummy antecedent in column 0 and -inf
    outside the window; ``gold`` is a boolean mask of the same shape.
    Returns the loss and its gradient with respect to ``logits``.
    """
    if logits.shape[0] == 0:
        return 0.0, np.zeros_like(logits)
    if not gold.any(axis=1).all():
        raise ValueError("every candidate needs at least one gold antecedent (the dummy counts)")
    gold_logits = np.where(gold, logits, -np.inf)
    if np.isneginf(gold_logits.max(axis=1)).any():
        raise ValueError("gold antecedent outside the antecedent window")
    norm = _logsumexp_rows(logits)
    marg = _logsumexp_rows(gold_logits)
    loss = float(np.sum(norm - marg))
    with np.errstate(invalid="ignore"):
        p_all = np.exp(logits - norm[:, None])
        p_gold = np.exp(gold_logits - marg[:, None])
    grad = np.nan_to_num(p_all) - np.nan_to_num(p_gold)
    return loss, grad


def antecedent_probabilities(logits: np.ndarray) -> np.ndarray:
    return np.exp(logits - _logsumexp_rows(logits)[:, None])


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def mention_loss(scores: np.ndarray, positives, negatives):
    """Binary cross-entropy on mention scores.

    Returns the loss and its gradient with respect to ``scores``.
    """
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(positives, dtype=np.int64)
    neg = np.asarray(negatives, dtype=np.int64)
    loss = float(softplus(-scores[pos]).sum() + softplus(scores[neg]).sum())
    grad = np.zeros_like(scores)
    np.add.at(grad, pos, sigmoid(scores[pos]) - 1.0)
    np.add.at(grad, neg, sigmoid(scores[neg]))
    return loss, grad


def sample_negatives(pool, n_positive: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly pick ``min(len(pool), n_positive)`` negatives without replacement."""
    pool = np.asarray(pool, dtype=np.int64)
    k = min(len(pool), n_positive)
    if n_positive == 0:
        log.debug("no gold mentions among candidates; mention loss is empty")
    if k == 0:
        return np.zeros(0, np.int64)
    return np.sort(rng.choice(pool, size=k, replace=False))


def total_loss(coref: float, mention: float, mention_weight: float) -> float:
    return coref + mention_weight * mention
