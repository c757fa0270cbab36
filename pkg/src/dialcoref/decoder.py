"""Antecedent selection and singleton-aware cluster construction."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .doc_model import ClusterSet
from .scorer.table import ScoreTable


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


def select_antecedents(table: ScoreTable) -> list[Optional[int]]:
    """Pick the best-scoring antecedent of every candidate.

    ``None`` stands for the dummy antecedent, which scores 0.  A real
    antecedent is chosen only when its score is strictly positive; among
    equal maxima the nearest one wins.  Mention scores of either side may be
    negative.
    """
    selection: list[Optional[int]] = []
    for i in range(len(table)):
        scores = table.pair_scores(i)
        if len(scores) == 0:
            selection.append(None)
            continue
        # nearest antecedent is last, so search the reversed array
        k = len(scores) - 1 - int(np.argmax(scores[::-1]))
        if scores[k] > 0.0:
            selection.append(i - len(scores) + k)
        else:
            selection.append(None)
    return selection


def build_clusters(table: ScoreTable, selection: Sequence[Optional[int]],
                   singletons: bool = True) -> ClusterSet:
    """Turn antecedent links into clusters.

    Linked candidates are merged transitively.  A candidate with neither an
    antecedent nor an inbound link becomes a singleton when its mention
    score is strictly positive and is dropped otherwise.  With
    ``singletons=False`` only linked candidates are kept.
    """
    n = len(table)
    if len(selection) != n:
        raise ValueError(f"selection has {len(selection)} entries for {n} candidates")
    uf = UnionFind(n)
    linked = [False] * n
    for i, j in enumerate(selection):
        if j is None:
            continue
        if not 0 <= j < i:
            raise ValueError(f"candidate {i} selects antecedent {j}, which does not precede it")
        uf.union(i, j)
        linked[i] = linked[j] = True
    clusters = []
    for group in uf.groups():
        if len(group) > 1:
            clusters.append([table.candidates[k] for k in group])
        elif singletons and not linked[group[0]] and table.mention_scores[group[0]] > 0.0:
            clusters.append([table.candidates[group[0]]])
    return ClusterSet(clusters)


def decode(table: ScoreTable, singletons: bool = True) -> ClusterSet:
    return build_clusters(table, select_antecedents(table), singletons)
