import numpy as np
import pytest

from dialcoref.decoder import UnionFind, build_clusters, decode, select_antecedents
from dialcoref.doc_model import ClusterSet, Span
from dialcoref.scorer import ScoreTable
from oracles import decode_oracle

GYM, TRUCK, BUILDING, SLIGHTLY, PLACE = (Span(2, 3), Span(8, 9), Span(14, 15), Span(18, 18),
                                         Span(22, 23))


def figure_scenario() -> ScoreTable:
    """A gym mentioned three times, a food truck once, and an adverb."""
    cands = [GYM, TRUCK, BUILDING, SLIGHTLY, PLACE]
    mention = [1.2, 0.6, -0.3, -1.5, -0.2]
    pairs = {(1, 0): -3.0,
             (2, 0): 0.5, (2, 1): -2.0,
             (3, 0): -1.0, (3, 1): -1.0, (3, 2): -1.0,
             (4, 0): -2.0, (4, 1): -2.0, (4, 2): 1.0, (4, 3): -1.0}
    return ScoreTable.from_pairs(cands, mention, pairs, max_antecedents=50)


def test_figure_scenario():
    table = figure_scenario()
    assert select_antecedents(table) == [None, None, 0, None, 2]
    clusters = decode(table)
    assert clusters == ClusterSet([[GYM, BUILDING, PLACE], [TRUCK]])
    assert SLIGHTLY not in clusters.mentions


def test_figure_scenario_without_singletons():
    assert decode(figure_scenario(), singletons=False) == ClusterSet([[GYM, BUILDING, PLACE]])


def test_all_negative_pairs_select_dummy():
    t = ScoreTable.from_pairs([Span(0, 0), Span(1, 1)], [-1.0, -1.0], {(1, 0): 0.5})
    assert select_antecedents(t) == [None, None]


def test_tie_goes_to_nearest_and_zero_goes_to_dummy():
    cands = [Span(k, k) for k in range(3)]
    t = ScoreTable.from_pairs(cands, [0.0, 0.0, 0.0], {(2, 0): 0.4, (2, 1): 0.4, (1, 0): 0.0})
    assert select_antecedents(t) == [None, None, 1]
    # a score of exactly 0 loses to the dummy, and mention score 0 is not a singleton
    assert decode(t) == ClusterSet([[Span(1, 1), Span(2, 2)]])


def test_chain_is_one_cluster():
    cands = [Span(k, k) for k in range(3)]
    t = ScoreTable.from_pairs(cands, [0.1, 0.1, 0.1], {(1, 0): 1.0, (2, 1): 1.0, (2, 0): -5.0})
    assert decode(t) == ClusterSet([cands])


def test_inbound_link_keeps_negative_candidate():
    cands = [Span(0, 0), Span(1, 1)]
    t = ScoreTable.from_pairs(cands, [-0.5, 0.2], {(1, 0): 2.0})
    assert decode(t) == ClusterSet([cands])


def test_selection_must_point_backwards():
    t = figure_scenario()
    with pytest.raises(ValueError):
        build_clusters(t, [None, None, 3, None, None])
    with pytest.raises(ValueError):
        build_clusters(t, [None])


def test_raising_mention_score_adds_one_singleton():
    table = figure_scenario()
    selection = select_antecedents(table)
    before = build_clusters(table, selection)
    table.mention_scores[3] = 0.01  # "slightly"; pair scores stay frozen
    after = build_clusters(table, selection)
    assert set(after) == set(before) | {(SLIGHTLY,)}


def test_union_find():
    uf = UnionFind(6)
    uf.union(0, 3)
    uf.union(3, 5)
    uf.union(1, 2)
    groups = sorted(sorted(g) for g in uf.groups())
    assert groups == [[0, 3, 5], [1, 2], [4]]


def random_table(rng: np.random.Generator) -> ScoreTable:
    n = int(rng.integers(0, 14))
    K = int(rng.integers(1, 7))
    cands = [Span(k, k + int(rng.integers(0, 2))) for k in range(0, 2 * n, 2)]
    # half-integer grids make exact ties (and exact zeros) common
    mention = rng.integers(-4, 5, size=n) / 2.0
    pairs = {(i, j): float(rng.integers(-6, 7) / 2.0)
             for i in range(n) for j in range(max(0, i - K), i)}
    return ScoreTable.from_pairs(cands, mention, pairs, max_antecedents=K)


def test_random_tables_match_graph_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        t = random_table(rng)
        expected = decode_oracle(t.candidates, t.mention_scores, t.antecedent_scores,
                                 t.max_antecedents)
        got = decode(t)
        assert got == expected
        assert decode(t) == got
        assert all(len(c) >= 1 for c in got)
