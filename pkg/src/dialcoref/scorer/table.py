"""Mention and antecedent scores of one document, detached from the model."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..doc_model import Span

TABLE_FORMAT = "dialcoref-scores"
TABLE_VERSION = 1


@dataclass
class ScoreTable:
    """Scores over the pruned candidates of a document.

    ``antecedent_scores[i, j]`` holds s_a for ``j`` in the window of ``i``
    (the ``max_antecedents`` nearest preceding candidates) and NaN elsewhere.
    The dummy antecedent always scores 0.
    """

    candidates: tuple[Span, ...]
    mention_scores: np.ndarray
    antecedent_scores: np.ndarray
    max_antecedents: int
    doc_id: str = ""

    def __post_init__(self):
        self.candidates = tuple(self.candidates)
        self.mention_scores = np.asarray(self.mention_scores, dtype=float)
        n = len(self.candidates)
        if self.mention_scores.shape != (n,):
            raise ValueError(f"expected {n} mention scores, got shape {self.mention_scores.shape}")
        if self.antecedent_scores.shape != (n, n):
            raise ValueError(f"antecedent scores must be {n}x{n}")

    def __len__(self):
        return len(self.candidates)

    def window(self, i: int) -> range:
        return range(max(0, i - self.max_antecedents), i)

    def pair_scores(self, i: int) -> np.ndarray:
        """Full scores s(x_i, y) for y over the window, nearest antecedent last."""
        lo = max(0, i - self.max_antecedents)
        return (self.mention_scores[i] + self.mention_scores[lo:i]
                + self.antecedent_scores[i, lo:i])

    @classmethod
    def from_pairs(cls, candidates, mention_scores, pairs: dict, max_antecedents: int = 50,
                   doc_id: str = "") -> "ScoreTable":
        n = len(candidates)
        sa = np.full((n, n), np.nan)
        for (i, j), v in pairs.items():
            if not (0 <= j < i < n) or i - j > max_antecedents:
                raise ValueError(f"pair ({i}, {j}) outside the antecedent window")
            sa[i, j] = v
        for i in range(n):
            for j in range(max(0, i - max_antecedents), i):
                if np.isnan(sa[i, j]):
                    sa[i, j] = 0.0
        return cls(tuple(candidates), np.asarray(mention_scores, float), sa, max_antecedents, doc_id)

    def triples(self):
        for i in range(len(self.candidates)):
            for j in self.window(i):
                yield i, j, float(self.antecedent_scores[i, j])

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "max_antecedents": self.max_antecedents,
            "candidates": [[s.start, s.end] for s in self.candidates],
            "mention_scores": [float(x) for x in self.mention_scores],
            "antecedent_scores": [[i, j, v] for i, j, v in self.triples()],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ScoreTable":
        cands = [Span(a, b) for a, b in rec["candidates"]]
        pairs = {(i, j): v for i, j, v in rec["antecedent_scores"]}
        return cls.from_pairs(cands, rec["mention_scores"], pairs, rec["max_antecedents"],
                              rec.get("doc_id", ""))


def pair_score(table: ScoreTable, i: int, j) -> float:
    """s(x_i, y) = s_m(x_i) + s_m(y) + s_a(x_i, y); ``j=None`` is the dummy (0)."""
    if j is None:
        return 0.0
    if j >= i:
        raise ValueError(f"antecedent {j} does not precede candidate {i}")
    if i - j > table.max_antecedents:
        raise ValueError(f"antecedent {j} outside the window of candidate {i}")
    return float(table.mention_scores[i] + table.mention_scores[j] + table.antecedent_scores[i, j])


def write_tables(tables, path):
    header = {"format": TABLE_FORMAT, "version": TABLE_VERSION}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for t in tables:
            fh.write(json.dumps(t.to_record()) + "\n")


def read_tables(path) -> list[ScoreTable]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty score file")
    header = json.loads(lines[0])
    if header.get("format") != TABLE_FORMAT or header.get("version") != TABLE_VERSION:
        raise ValueError(f"{path}: not a version-{TABLE_VERSION} score table file")
    return [ScoreTable.from_record(json.loads(ln)) for ln in lines[1:]]
