import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import all_spanning_trees, brute_force_max_tree, random_symmetric
from forestprior.errors import ContractError
from forestprior.forest import (
    DisjointSet,
    EdgeTrace,
    Forest,
    best_prefix,
    degree,
    kruskal,
    prune_by_holdout,
)


class TestEnumerationOracle:
    @pytest.mark.parametrize("d, count", [(2, 1), (3, 3), (4, 16), (5, 125), (6, 1296)])
    def test_cayley_counts(self, d, count):
        trees = [frozenset(t) for t in all_spanning_trees(d)]
        assert len(trees) == len(set(trees)) == count
        for t in trees:
            Forest(d, t)


class TestDisjointSet:
    def test_basic(self):
        ds = DisjointSet(4)
        assert ds.union(0, 1)
        assert ds.union(2, 3)
        assert not ds.union(1, 0)
        assert ds.components == 2
        assert ds.find(0) == ds.find(1) != ds.find(2)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 30).flatmap(lambda d: st.tuples(st.just(d), st.lists(st.tuples(st.integers(0, d - 1), st.integers(0, d - 1)), max_size=60))))
    def test_component_count(self, case):
        d, ops = case
        ds = DisjointSet(d)
        merges = sum(ds.union(a, b) for a, b in ops)
        roots = {ds.find(v) for v in range(d)}
        assert ds.components == len(roots) == d - merges


class TestForest:
    def test_normalizes_orientation(self):
        f = Forest.from_edges(3, [(2, 0), (1, 2)])
        assert f.sorted_edges() == [(0, 2), (1, 2)]
        assert f.is_spanning_tree()

    @pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)], [(0, 1), (1, 2), (0, 2)], [(-1, 0)]])
    def test_rejects(self, edges):
        with pytest.raises(ContractError):
            Forest.from_edges(3, edges)

    def test_degree(self):
        f = Forest.from_edges(4, [(0, 1), (0, 2), (0, 3)])
        assert degree(f, 0) == 3
        assert f.degree(2) == 1
        assert Forest.empty(4).degree(0) == 0
        with pytest.raises(ContractError):
            degree(f, 4)

    def test_degree_sum_is_twice_edges(self, rng):
        w = random_symmetric(rng, 12)
        f, _ = kruskal(w)
        assert f.degrees.sum() == 2 * len(f)

    def test_degrees_read_only(self):
        f = Forest.from_edges(3, [(0, 1)])
        with pytest.raises(ValueError):
            f.degrees[0] = 5

    def test_adjacency_and_neighbors(self):
        f = Forest.from_edges(3, [(0, 1), (1, 2)])
        a = f.adjacency()
        np.testing.assert_array_equal(a, a.T)
        assert f.neighbors() == [[1], [0, 2], [1]]

    def test_hashable_equality(self):
        assert Forest.from_edges(3, [(1, 0)]) == Forest.from_edges(3, [(0, 1)])
        assert len({Forest.from_edges(3, [(1, 0)]), Forest.from_edges(3, [(0, 1)])}) == 1


class TestKruskal:
    def test_hand_example(self):
        w = np.array(
            [
                [0, 5, 1, 0],
                [5, 0, 4, 3],
                [1, 4, 0, 2],
                [0, 3, 2, 0],
            ],
            dtype=float,
        )
        f, trace = kruskal(w)
        assert trace.edges == [(0, 1), (1, 2), (1, 3)]
        assert f.total_weight(w) == 12

    def test_tie_break_lexicographic(self):
        w = np.ones((4, 4)) - np.eye(4)
        _, trace = kruskal(w)
        assert trace.edges == [(0, 1), (0, 2), (0, 3)]

    def test_negative_weights_still_span(self):
        w = -np.ones((3, 3))
        np.fill_diagonal(w, 0)
        f, _ = kruskal(w)
        assert f.is_spanning_tree()

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_matches_brute_force(self, d, seed):
        w = random_symmetric(np.random.default_rng(seed), d)
        f, trace = kruskal(w)
        assert f.is_spanning_tree()
        assert f.total_weight(w) == pytest.approx(brute_force_max_tree(w), abs=1e-12)
        weights = [s[2] for s in trace]
        assert weights == sorted(weights, reverse=True)

    def test_deterministic(self, rng):
        w = np.round(random_symmetric(rng, 15), 1)  # many ties
        assert kruskal(w)[1] == kruskal(w.copy())[1]

    @pytest.mark.parametrize(
        "w",
        [np.zeros((3, 2)), np.zeros((1, 1)), np.array([[0.0, np.nan], [np.nan, 0.0]]), np.array([[0.0, 1.0], [2.0, 0.0]])],
    )
    def test_contract(self, w):
        with pytest.raises(ContractError):
            kruskal(w)


class TestPruning:
    @pytest.mark.parametrize(
        "terms, k",
        [
            ([1.0, -0.5, 2.0, -3.0], 3),
            ([-1.0, -2.0], 0),
            ([1.0, -1.0, 1.0], 1),  # tie: smallest k
            ([], 0),
            ([0.0, 0.0], 0),
        ],
    )
    def test_best_prefix(self, terms, k):
        assert best_prefix(terms)[0] == k

    def test_prune_sequence_and_matrix(self):
        trace = EdgeTrace(4, ((0, 1, 3.0), (1, 2, 2.0), (2, 3, 1.0)))
        m = np.zeros((4, 4))
        for (i, j), t in zip(trace.edges, [0.5, 0.2, -0.4]):
            m[i, j] = m[j, i] = t
        assert prune_by_holdout(trace, [0.5, 0.2, -0.4]) == trace.prefix(2)
        assert prune_by_holdout(trace, m) == trace.prefix(2)

    def test_prune_length_mismatch(self):
        trace = EdgeTrace(3, ((0, 1, 1.0), (1, 2, 0.5)))
        with pytest.raises(ContractError):
            prune_by_holdout(trace, [1.0])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-5, 5, allow_nan=False), max_size=20))
    def test_best_prefix_is_optimal(self, terms):
        k, best = best_prefix(terms)
        sums = np.concatenate([[0.0], np.cumsum(terms)])
        assert best == pytest.approx(sums.max())
        assert sums[k] == pytest.approx(sums.max())
        assert np.all(sums[:k] < sums[k] + 1e-9) or k == 0
