"""The span-ranking coreference scorer with hand-written backpropagation.

Token vectors come from an embedding provider plus an attention-pooled
sentence context, so tokens prepended to a sentence (speaker tokens) reach
the representation of every span in it.  A span is represented by
``[first token; last token; attention head; width embedding]``.  Two
feed-forward scorers give the mention score of every span and the
antecedent score of every candidate pair inside the antecedent window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..config import PipelineConfig
from ..doc_model import Document, Span
from .embeddings import HashEmbeddings, LearnedEmbeddings
from .losses import coref_loss, mention_loss, sample_negatives, total_loss
from .spans import (DISTANCE_BUCKET_EDGES, WIDTH_BUCKET_EDGES, distance_bucket, prune_candidates,
                    span_arrays, speaker_relation, width_bucket)
from .table import ScoreTable

log = logging.getLogger(__name__)

N_WIDTH = len(WIDTH_BUCKET_EDGES)
N_DISTANCE = len(DISTANCE_BUCKET_EDGES)


class NonFiniteError(FloatingPointError):
    pass


def relu(x):
    return np.maximum(x, 0.0)


def _ffnn_forward(params, prefix, x):
    z1 = x @ params[prefix + "W1"] + params[prefix + "b1"]
    a1 = relu(z1)
    z2 = a1 @ params[prefix + "W2"] + params[prefix + "b2"]
    a2 = relu(z2)
    out = a2 @ params[prefix + "w3"] + params[prefix + "b3"][0]
    return out, (x, z1, a1, z2, a2)


def _ffnn_backward(params, prefix, cache, dout, grads):
    x, z1, a1, z2, a2 = cache
    grads[prefix + "w3"] += a2.T @ dout
    grads[prefix + "b3"][0] += dout.sum()
    dz2 = np.outer(dout, params[prefix + "w3"]) * (z2 > 0)
    grads[prefix + "W2"] += a1.T @ dz2
    grads[prefix + "b2"] += dz2.sum(axis=0)
    dz1 = (dz2 @ params[prefix + "W2"].T) * (z1 > 0)
    grads[prefix + "W1"] += x.T @ dz1
    grads[prefix + "b1"] += dz1.sum(axis=0)
    return dz1 @ params[prefix + "W1"].T


def _segment_softmax(z, starts, seg):
    """Softmax of ``z`` within contiguous segments beginning at ``starts``."""
    zmax = np.maximum.reduceat(z, starts)
    ez = np.exp(z - zmax[seg])
    return ez / np.add.reduceat(ez, starts)[seg]


@dataclass
class DocInputs:
    """Everything about a document the scorer needs, precomputed once."""

    doc: Document
    rows: np.ndarray          # token -> embedding table row, -1 if frozen
    frozen: np.ndarray        # (T, d) fallback vectors
    sent_of: np.ndarray       # token -> sentence
    sent_starts: np.ndarray
    sent_speaker: np.ndarray  # sentence -> speaker id, -1 unknown
    starts: np.ndarray
    ends: np.ndarray
    width_ids: np.ndarray
    head_idx: np.ndarray      # (S, W) token indices, clipped
    head_mask: np.ndarray     # (S, W)
    n_words: int              # tokens excluding injected speaker tokens
    gold_cluster: np.ndarray  # span -> gold cluster id, -1 if not a gold mention

    @property
    def spans(self) -> list[Span]:
        return [Span(int(a), int(b)) for a, b in zip(self.starts, self.ends)]


@dataclass
class Forward:
    """Result of a forward pass, with the intermediates backprop needs."""

    table: ScoreTable
    cand: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_c: np.ndarray
    logits: np.ndarray  # (n, K+1); column 0 is the dummy antecedent
    cache: dict


class SpanScorer:
    """Mention and antecedent scoring over one document at a time."""

    def __init__(self, config: PipelineConfig, vocab=(), params: Optional[dict] = None,
                 speaker_tokens=()):
        self.config = config
        d = config.embedding_dim
        if config.embedding == "learned":
            self.embedder = LearnedEmbeddings(d, vocab, seed=config.seed)
        elif config.embedding == "hash":
            self.embedder = HashEmbeddings(d, seed=config.seed)
        else:
            raise ValueError(f"unknown embedding provider {config.embedding!r}")
        self.speaker_tokens = frozenset(speaker_tokens)
        self.params = params if params is not None else self.init_params()
        self._inputs: dict[int, DocInputs] = {}

    # -- parameters ---------------------------------------------------------

    @property
    def span_dim(self) -> int:
        return 3 * self.config.embedding_dim + self.config.feature_size

    def init_params(self) -> dict:
        cfg = self.config
        d, h, f = cfg.embedding_dim, cfg.hidden_size, cfg.feature_size
        D = self.span_dim
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))

        def dense(n_in, n_out):
            return rng.standard_normal((n_in, n_out)) * np.sqrt(2.0 / n_in)

        p = {}
        if isinstance(self.embedder, LearnedEmbeddings):
            p["token_table"] = self.embedder.initial_table()
        p["ctx_query"] = rng.standard_normal(d) * 0.1
        p["ctx_proj"] = rng.standard_normal((d, d)) * (0.1 / np.sqrt(d))
        p["head_query"] = rng.standard_normal(d) * 0.1
        p["width_emb"] = rng.standard_normal((N_WIDTH, f)) * 0.1
        p["phi_dialogue"] = rng.standard_normal((2, f)) * 0.1
        p["phi_speaker"] = rng.standard_normal((3, f)) * 0.1
        p["phi_distance"] = rng.standard_normal((N_DISTANCE, f)) * 0.1
        for prefix, n_in in (("m_", D), ("a_", 3 * D + 3 * f)):
            p[prefix + "W1"] = dense(n_in, h)
            p[prefix + "b1"] = np.zeros(h)
            p[prefix + "W2"] = dense(h, h)
            p[prefix + "b2"] = np.zeros(h)
            p[prefix + "w3"] = rng.standard_normal(h) * (0.1 / np.sqrt(h))
            p[prefix + "b3"] = np.zeros(1)
        return p

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    # -- inputs -------------------------------------------------------------

    def inputs(self, doc: Document) -> DocInputs:
        hit = self._inputs.get(id(doc))
        if hit is not None and hit.doc is doc:
            return hit
        inp = self._build_inputs(doc)
        if len(self._inputs) > 4096:
            self._inputs.clear()
        self._inputs[id(doc)] = inp
        return inp

    def _build_inputs(self, doc: Document) -> DocInputs:
        words = doc.words
        rows = self.embedder.rows(words)
        frozen = self.embedder.lookup(words)
        sent_of = np.array(doc.sentence_index(), dtype=np.int64)
        sent_starts = np.array([s.start for s in doc.sentences], dtype=np.int64)
        speakers = {s: k for k, s in enumerate(doc.speakers())}
        sent_speaker = np.array([speakers.get(s.speaker, -1) if s.speaker is not None else -1
                                 for s in doc.sentences], dtype=np.int64)
        starts, ends = span_arrays(doc, self.config.max_span_width)
        widths = ends - starts + 1
        W = int(widths.max()) if len(widths) else 1
        head_idx = starts[:, None] + np.arange(W)[None, :]
        head_mask = head_idx <= ends[:, None]
        head_idx = np.minimum(head_idx, ends[:, None])
        gold = np.full(len(starts), -1, dtype=np.int64)
        if doc.gold_clusters is not None and len(starts):
            lookup = {(m.start, m.end): k for m, k in doc.gold_clusters.mention_to_cluster().items()}
            gold = np.array([lookup.get((int(a), int(b)), -1) for a, b in zip(starts, ends)],
                            dtype=np.int64)
        n_words = sum(1 for t in doc.tokens if not t.is_speaker)
        return DocInputs(doc, rows, frozen, sent_of, sent_starts, sent_speaker, starts, ends,
                         width_bucket(widths), head_idx, head_mask, n_words, gold)

    # -- forward ------------------------------------------------------------

    def _token_vectors(self, inp: DocInputs):
        E = inp.frozen
        if "token_table" in self.params:
            known = inp.rows >= 0
            if known.any():
                E = E.copy()
                E[known] = self.params["token_table"][inp.rows[known]]
        return E

    def forward(self, doc: Document, keep_cache: bool = False) -> Forward:
        """Score every span, prune, and score candidate pairs."""
        cfg = self.config
        p = self.params
        inp = self.inputs(doc)
        cache = {}

        E = self._token_vectors(inp)
        if len(E) and cfg.sentence_context:
            z = E @ p["ctx_query"]
            alpha = _segment_softmax(z, inp.sent_starts, inp.sent_of)
            M = np.add.reduceat(alpha[:, None] * E, inp.sent_starts, axis=0)
            C = M @ p["ctx_proj"]
            H = E + C[inp.sent_of]
            cache.update(E=E, alpha=alpha, M=M)
        else:
            H = E
            cache.update(E=E)

        S = len(inp.starts)
        if S == 0:
            empty = ScoreTable((), np.zeros(0), np.zeros((0, 0)), cfg.max_antecedents, doc.doc_id)
            z0 = np.zeros(0, np.int64)
            return Forward(empty, z0, z0, z0, z0, np.zeros((0, cfg.max_antecedents + 1)), cache)

        Hs = H[inp.head_idx]                                  # (S, W, d)
        a = Hs @ p["head_query"]
        a = np.where(inp.head_mask, a, -np.inf)
        a = a - a.max(axis=1, keepdims=True)
        beta = np.exp(a)
        beta /= beta.sum(axis=1, keepdims=True)
        head = np.einsum("sw,swd->sd", beta, Hs)
        G = np.concatenate([H[inp.starts], H[inp.ends], head, p["width_emb"][inp.width_ids]], axis=1)

        sm_all, m_cache = _ffnn_forward(p, "m_", G)
        self._check_finite(sm_all, "mention scores")

        cand = np.array(prune_candidates((inp.starts, inp.ends), sm_all, cfg.top_span_ratio,
                                         inp.n_words), dtype=np.int64)
        n = len(cand)
        K = cfg.max_antecedents
        Gc = G[cand]
        smc = sm_all[cand]

        pi, pj, pc = _window_pairs(n, K)
        if len(pi):
            Gi, Gj = Gc[pi], Gc[pj]
            spk = inp.sent_speaker[inp.sent_of[inp.starts[cand]]]
            f_spk = speaker_relation(spk[pi], spk[pj])
            f_dist = distance_bucket(pc)
            f_dial = np.full(len(pi), int(doc.is_dialogue))
            X = np.concatenate([Gi, Gj, Gi * Gj, p["phi_dialogue"][f_dial],
                                p["phi_speaker"][f_spk], p["phi_distance"][f_dist]], axis=1)
            sa, a_cache = _ffnn_forward(p, "a_", X)
            self._check_finite(sa, "antecedent scores")
            cache.update(a_cache=a_cache, f_spk=f_spk, f_dist=f_dist, f_dial=f_dial, Gi=Gi, Gj=Gj)
        else:
            sa = np.zeros(0)

        logits = np.full((n, K + 1), -np.inf)
        logits[:, 0] = 0.0
        logits[pi, pc] = smc[pi] + smc[pj] + sa

        sa_dense = np.full((n, n), np.nan)
        sa_dense[pi, pj] = sa
        cands = tuple(Span(int(inp.starts[k]), int(inp.ends[k])) for k in cand)
        table = ScoreTable(cands, smc.copy(), sa_dense, K, doc.doc_id)

        if keep_cache:
            cache.update(inp=inp, H=H, Hs=Hs, beta=beta, G=G, m_cache=m_cache, sm_all=sm_all)
        return Forward(table, cand, pi, pj, pc, logits, cache)

    def score(self, doc: Document) -> ScoreTable:
        return self.forward(doc).table

    def _check_finite(self, values, what):
        if not np.all(np.isfinite(values)):
            norms = {k: float(np.linalg.norm(v)) for k, v in self.params.items()}
            worst = sorted(norms.items(), key=lambda kv: -kv[1])[:5]
            raise NonFiniteError(f"non-finite {what}; largest parameter norms: {worst}")

    # -- training objective -------------------------------------------------

    def loss(self, doc: Document, rng: np.random.Generator, with_grad: bool = True):
        """Joint loss of one document and (optionally) its gradient.

        Returns ``(total, coref, mention, grads)``; ``grads`` is None when
        ``with_grad`` is false.
        """
        cfg = self.config
        fwd = self.forward(doc, keep_cache=True)
        inp = fwd.cache["inp"] if "inp" in fwd.cache else self.inputs(doc)
        n = len(fwd.cand)
        if n == 0:
            return 0.0, 0.0, 0.0, (self.zero_grads() if with_grad else None)
        cl = inp.gold_cluster[fwd.cand]
        gold = _gold_mask(cl, fwd.pair_i, fwd.pair_c, cfg.max_antecedents)
        lc, dlogits = coref_loss(fwd.logits, gold)

        alpha_m = cfg.mention_loss_weight if cfg.singleton_recognition else 0.0
        cand = fwd.cand
        sm_all = fwd.cache["sm_all"]
        if alpha_m > 0:
            pos, neg = self.mention_examples(inp, cand, rng)
            lm, dsm_all = mention_loss(sm_all, pos, neg)
            rows = np.union1d(cand, pos)
        else:
            lm, dsm_all = 0.0, np.zeros(len(sm_all))
            rows = cand
        total = total_loss(lc, lm, alpha_m)
        if not with_grad:
            return total, lc, lm, None
        grads = self._backward(fwd, dlogits, rows, alpha_m * dsm_all[rows])
        return total, lc, lm, grads

    def mention_examples(self, inp: DocInputs, cand: np.ndarray, rng: np.random.Generator):
        """Positive and sampled negative spans for the mention loss.

        Negatives are drawn from the non-gold candidates, as many as there
        are positives.  Positives are the gold candidates, or every gold span
        when ``mention_loss_scope`` is ``all_spans``.
        """
        is_gold = inp.gold_cluster >= 0
        if self.config.mention_loss_scope == "candidates":
            pos = cand[is_gold[cand]]
        elif self.config.mention_loss_scope == "all_spans":
            pos = np.flatnonzero(is_gold)
        else:
            raise ValueError(f"unknown mention_loss_scope {self.config.mention_loss_scope!r}")
        neg = sample_negatives(cand[~is_gold[cand]], len(pos), rng)
        return pos, neg

    def _backward(self, fwd: Forward, dlogits, rows, dsm_rows):
        """Gradients of the loss given d(loss)/d(logits) and extra mention-score terms.

        ``rows`` are the spans whose mention score receives gradient (sorted,
        a superset of the candidates) and ``dsm_rows`` the matching direct
        mention-score gradients.
        """
        p = self.params
        cfg = self.config
        c = fwd.cache
        inp = c["inp"]
        grads = self.zero_grads()
        pi, pj, pc = fwd.pair_i, fwd.pair_j, fwd.pair_c
        cand = fwd.cand
        n = len(cand)
        D = self.span_dim
        f = cfg.feature_size
        at = np.searchsorted(rows, cand)

        dG = np.zeros((len(rows), D))
        dsm = np.array(dsm_rows, dtype=float)
        if len(pi):
            dpair = dlogits[pi, pc]
            dsm[at] += np.bincount(pi, dpair, minlength=n) + np.bincount(pj, dpair, minlength=n)
            dX = _ffnn_backward(p, "a_", c["a_cache"], dpair, grads)
            Gi, Gj = c["Gi"], c["Gj"]
            dGi = dX[:, :D] + dX[:, 2 * D:3 * D] * Gj
            dGj = dX[:, D:2 * D] + dX[:, 2 * D:3 * D] * Gi
            dGc = np.zeros((n, D))
            np.add.at(dGc, pi, dGi)
            np.add.at(dGc, pj, dGj)
            dG[at] += dGc
            off = 3 * D
            np.add.at(grads["phi_dialogue"], c["f_dial"], dX[:, off:off + f])
            np.add.at(grads["phi_speaker"], c["f_spk"], dX[:, off + f:off + 2 * f])
            np.add.at(grads["phi_distance"], c["f_dist"], dX[:, off + 2 * f:off + 3 * f])

        x, z1, a1, z2, a2 = c["m_cache"]
        m_cache_r = (x[rows], z1[rows], a1[rows], z2[rows], a2[rows])
        dG += _ffnn_backward(p, "m_", m_cache_r, dsm, grads)

        d = cfg.embedding_dim
        T = len(c["E"])
        dH = np.zeros((T, d))
        np.add.at(dH, inp.starts[rows], dG[:, :d])
        np.add.at(dH, inp.ends[rows], dG[:, d:2 * d])
        dhead = dG[:, 2 * d:3 * d]
        np.add.at(grads["width_emb"], inp.width_ids[rows], dG[:, 3 * d:])

        Hs = c["Hs"][rows]
        beta = c["beta"][rows]
        dbeta = np.einsum("nwd,nd->nw", Hs, dhead)
        da = beta * (dbeta - (beta * dbeta).sum(axis=1, keepdims=True))
        grads["head_query"] += np.einsum("nw,nwd->d", da, Hs)
        dHs = beta[:, :, None] * dhead[:, None, :] + da[:, :, None] * p["head_query"][None, None, :]
        np.add.at(dH, inp.head_idx[rows], dHs)

        E = c["E"]
        dE = dH
        if cfg.sentence_context:
            alpha, M = c["alpha"], c["M"]
            dC = np.add.reduceat(dH, inp.sent_starts, axis=0)
            grads["ctx_proj"] += M.T @ dC
            dM = dC @ p["ctx_proj"].T
            dMt = dM[inp.sent_of]
            dalpha = np.einsum("td,td->t", E, dMt)
            wsum = np.add.reduceat(alpha * dalpha, inp.sent_starts)
            dz = alpha * (dalpha - wsum[inp.sent_of])
            grads["ctx_query"] += dz @ E
            dE = dH + alpha[:, None] * dMt + dz[:, None] * p["ctx_query"][None, :]
        if "token_table" in p:
            known = inp.rows >= 0
            np.add.at(grads["token_table"], inp.rows[known], dE[known])
        return grads


def _window_pairs(n: int, K: int):
    """All (i, j, i - j) with 0 < i - j <= K, grouped by offset."""
    pi, pj, pc = [], [], []
    for off in range(1, min(K, n - 1) + 1):
        i = np.arange(off, n)
        pi.append(i)
        pj.append(i - off)
        pc.append(np.full(len(i), off))
    if not pi:
        z = np.zeros(0, np.int64)
        return z, z, z
    return (np.concatenate(pi).astype(np.int64), np.concatenate(pj).astype(np.int64),
            np.concatenate(pc).astype(np.int64))


def _gold_mask(cluster_ids, pi, pc, K):
    n = len(cluster_ids)
    gold = np.zeros((n, K + 1), dtype=bool)
    if len(pi):
        pj = pi - pc
        same = (cluster_ids[pi] >= 0) & (cluster_ids[pi] == cluster_ids[pj])
        gold[pi[same], pc[same]] = True
    gold[:, 0] = ~gold[:, 1:].any(axis=1)
    return gold
