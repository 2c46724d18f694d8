import math
from fractions import Fraction

import networkx as nx
import pytest

from smoothflood.errors import BudgetExceededError
from smoothflood.graph import Graph
from smoothflood.oracle import (
    connected_graph_classes,
    enumerate_t_smoothing,
    exact_targeted_distribution,
    exhaustive_flooding_time,
)
from smoothflood.smoothing import KSmooth, Proportional, Targeted

# survivor count of complete K4 with t = 2, recorded from the first
# enumeration: 1 + 6 removals + 15 double removals, all connected
K4_T2_SURVIVORS = 22


def test_triangle_t1():
    table = enumerate_t_smoothing(Graph(3, [(0, 1), (0, 2), (1, 2)]), 1)
    assert len(table) == 4
    assert all(p == 0.25 for p in table.probabilities.values())


def test_single_edge_t1():
    table = enumerate_t_smoothing(Graph.path(2), 1)
    assert list(table.probabilities.values()) == [1.0]


def test_complete4_t2_frozen():
    assert len(enumerate_t_smoothing(Graph.complete(4), 2)) == K4_T2_SURVIVORS


def test_support_tables_sum_to_one():
    for g in connected_graph_classes(5):
        for t in (1, 2, 3):
            assert abs(enumerate_t_smoothing(g, t).total() - 1) < 1e-12


def test_enumeration_budget():
    with pytest.raises(BudgetExceededError):
        enumerate_t_smoothing(Graph.path(7), 1)
    with pytest.raises(BudgetExceededError):
        enumerate_t_smoothing(Graph.path(4), 4)


def test_targeted_empty_difference():
    g = Graph.path(4)
    table = exact_targeted_distribution(g, g, 0.3)
    assert table.probabilities == {g: 1.0}


def test_targeted_single_change():
    old = Graph.path(4)
    new = Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    table = exact_targeted_distribution(old, new, 0.3)
    assert table.probabilities[new] == pytest.approx(0.7, abs=1e-15)
    assert table.probabilities[old] == pytest.approx(0.3, abs=1e-15)


def test_targeted_reversion_that_disconnects_is_conditioned_away():
    # old lacks the only edge to vertex 3; new adds it.  Reverting the
    # addition would isolate 3.
    old = Graph(4, [(0, 1), (1, 2)])
    new = Graph(4, [(0, 1), (1, 2), (2, 3)])
    assert exact_targeted_distribution(old, new, 0.9).probabilities == {new: 1.0}


def test_targeted_budget():
    with pytest.raises(BudgetExceededError):
        exact_targeted_distribution(Graph.empty(6), Graph.complete(6), 0.5)


def test_exhaustive_noiseless_path():
    assert exhaustive_flooding_time([Graph.path(4)], KSmooth(0)) == {3: 1.0}


def test_exhaustive_bounds():
    seqs = [[Graph.path(5)], [Graph.star(5, 4), Graph.path(5)], [Graph.cycle(4)]]
    for seq in seqs:
        for model in (KSmooth(1), Targeted(0.5), Proportional(0.5, cap=1)):
            dist = exhaustive_flooding_time(seq, model)
            n = seq[0].n
            mean = sum(t * p for t, p in dist.items())
            assert 1 <= mean <= n - 1
            assert abs(sum(dist.values()) - 1) < 1e-12


def test_exhaustive_budget():
    with pytest.raises(BudgetExceededError):
        exhaustive_flooding_time([Graph.path(6)], KSmooth(0))
    with pytest.raises(BudgetExceededError):
        exhaustive_flooding_time([Graph.path(5)], KSmooth(1), max_leaves=10)


def test_connected_classes_match_atlas():
    atlas = nx.graph_atlas_g()
    for n in range(1, 6):
        expected = sum(1 for g in atlas if g.number_of_nodes() == n and nx.is_connected(g))
        mine = connected_graph_classes(n)
        assert len(mine) == expected
        # representatives are pairwise non-isomorphic
        nxs = [nx.Graph(g.edges()) for g in mine]
        for h in nxs:
            h.add_nodes_from(range(n))
        for i in range(len(nxs)):
            for j in range(i + 1, len(nxs)):
                assert not nx.is_isomorphic(nxs[i], nxs[j])
