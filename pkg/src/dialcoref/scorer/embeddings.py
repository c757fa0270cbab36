"""Token embedding providers standing in for a pretrained encoder."""

from __future__ import annotations

import hashlib

import numpy as np


class HashEmbeddings:
    """Frozen pseudo-random vectors keyed by a hash of the token string.

    The same (seed, token) pair always gives the same vector, across runs
    and processes.
    """

    trainable = False

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(f"{self.seed}\x00{token}".encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim) / np.sqrt(self.dim)
            self._cache[token] = vec
        return vec

    def lookup(self, tokens) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self.vector(t) for t in tokens])

    def rows(self, tokens) -> np.ndarray:
        return np.full(len(tokens), -1, dtype=np.int64)


class LearnedEmbeddings(HashEmbeddings):
    """A trainable lookup table over a fixed vocabulary.

    Rows start from the hash vectors; tokens outside the vocabulary fall
    back to their (frozen) hash vector.  The table itself lives in the
    model parameters under ``token_table``.
    """

    trainable = True

    def __init__(self, dim: int, vocab, seed: int = 0):
        super().__init__(dim, seed)
        self.vocab = list(dict.fromkeys(vocab))
        self.index = {w: k for k, w in enumerate(self.vocab)}

    def initial_table(self) -> np.ndarray:
        if not self.vocab:
            return np.zeros((0, self.dim))
        return np.stack([self.vector(w) for w in self.vocab])

    def rows(self, tokens) -> np.ndarray:
        return np.array([self.index.get(t, -1) for t in tokens], dtype=np.int64)
