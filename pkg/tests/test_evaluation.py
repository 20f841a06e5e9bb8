import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import adjacency_lists, bfs_within, random_sets, random_unit_dataset
from stars.core import Dataset, SimilarityGraph
from stars.data import MixtureSpec, gen_gaussian_mixture
from stars.evaluation import (
    allpairs_oracle,
    ann_two_hop_recall,
    evaluate,
    knn_recall,
    sparsity_report,
    threshold_two_hop_recall,
    top_k_row,
)
from stars.lsh import SimHash
from stars.similarity import ComparisonCounter, get_measure
from stars.sorting import SortingConfig, build_knn_spanner
from stars.threshold import ThresholdConfig, build_threshold_spanner

ANG = get_measure("angular")


def _graph_from_truth(truth, data, measure):
    return SimilarityGraph(data.n, truth.threshold_a, truth.threshold_b,
                           measure.pairs(data, truth.threshold_a, truth.threshold_b))


def _knn_star_graph(truth, data):
    n, k = truth.knn.shape
    return SimilarityGraph(n, np.repeat(np.arange(n), k), truth.knn.ravel(), truth.knn_sims.ravel())


class TestOracle:
    def test_identical_points(self):
        data = Dataset(vectors=[[1.0, 1.0]] * 3)
        truth = allpairs_oracle(data, ANG, r2=1.0)
        assert set(zip(truth.threshold_a.tolist(), truth.threshold_b.tolist())) == {(0, 1), (0, 2), (1, 2)}

    def test_k_is_n_minus_one(self):
        data = random_unit_dataset(8, 3)
        truth = allpairs_oracle(data, ANG, k=7)
        for p in range(8):
            assert set(truth.knn[p].tolist()) == set(range(8)) - {p}

    def test_k_clamped(self):
        truth = allpairs_oracle(random_unit_dataset(4, 3), ANG, k=10)
        assert truth.knn.shape == (4, 3)

    def test_comparison_count(self):
        c = ComparisonCounter()
        truth = allpairs_oracle(random_unit_dataset(1000, 5), ANG, r2=0.9, counter=c)
        assert truth.comparisons == c.count == 499_500

    def test_knn_against_full_resort(self):
        data = random_unit_dataset(300, 6, seed=7)
        truth = allpairs_oracle(data, ANG, k=15)
        for p in np.random.default_rng(0).choice(300, 50, replace=False).tolist():
            sims = [(-ANG(data.vectors[p], data.vectors[q]), q) for q in range(300) if q != p]
            expect = [q for _, q in sorted(sims)[:15]]
            assert truth.knn[p].tolist() == expect

    def test_knn_tie_break_by_id(self):
        # points 1..4 are identical, so they tie for every other point
        data = Dataset(vectors=[[1.0, 0.1], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        truth = allpairs_oracle(data, ANG, k=2)
        assert truth.knn[0].tolist() == [1, 2]
        assert truth.knn[4].tolist() == [1, 2]

    def test_ann_superset_of_knn(self):
        data = gen_gaussian_mixture(MixtureSpec(n=300, dim=10, modes=5, seed=2))
        truth = allpairs_oracle(data, ANG, k=20, inv_eps=(1.0, 1.01, 1.2))
        for p in range(300):
            exact = set(truth.knn[p].tolist())
            assert exact <= set(truth.ann_sets[1.0][p].tolist())
            assert set(truth.ann_sets[1.0][p].tolist()) <= set(truth.ann_sets[1.01][p].tolist())
            assert set(truth.ann_sets[1.01][p].tolist()) <= set(truth.ann_sets[1.2][p].tolist())
            assert p not in truth.ann_sets[1.2][p]

    def test_set_measure(self):
        data = random_sets(40, seed=3)
        m = get_measure("jaccard")
        truth = allpairs_oracle(data, m, r2=0.3)
        expect = {(i, j) for i in range(40) for j in range(i + 1, 40) if m(data.sets[i], data.sets[j]) >= 0.3}
        assert set(zip(truth.threshold_a.tolist(), truth.threshold_b.tolist())) == expect

    def test_top_k_row(self):
        assert top_k_row(np.array([0.5, 0.9, 0.9, 0.1]), 2).tolist() == [1, 2]
        assert top_k_row(np.array([0.5, 0.9, 0.9, 0.1]), 2, exclude=1).tolist() == [2, 0]

    def test_inv_eps_below_one(self):
        with pytest.raises(ValueError):
            allpairs_oracle(random_unit_dataset(5, 2), ANG, k=2, inv_eps=(0.9,))


class TestThresholdRecall:
    def setup_method(self):
        self.data = gen_gaussian_mixture(MixtureSpec(n=200, dim=10, modes=4, seed=1))
        self.truth = allpairs_oracle(self.data, ANG, r2=0.7)

    def test_exact_graph_is_perfect(self):
        g = _graph_from_truth(self.truth, self.data, ANG)
        assert threshold_two_hop_recall(g, self.truth, 0.7) == 1.0

    def test_empty_graph(self):
        assert threshold_two_hop_recall(SimilarityGraph(200), self.truth, 0.7) == 0.0

    def test_relaxed_floor_monotone(self):
        cfg = ThresholdConfig(r1=0.6, repetitions=3, leaders=2, sketch_len=4)
        g, _ = build_threshold_spanner(self.data, ANG, SimHash(0), cfg)
        strict = threshold_two_hop_recall(g, self.truth, 0.7)
        relaxed = threshold_two_hop_recall(g, self.truth, 0.695)
        assert 0.0 <= strict <= relaxed <= 1.0

    def test_matches_bfs_oracle(self):
        cfg = ThresholdConfig(r1=0.65, repetitions=2, leaders=2, sketch_len=5)
        g, _ = build_threshold_spanner(self.data, ANG, SimHash(1), cfg)
        adj = adjacency_lists(g.filter(0.68))
        partners = [set() for _ in range(200)]
        for a, b in zip(self.truth.threshold_a.tolist(), self.truth.threshold_b.tolist()):
            partners[a].add(b)
            partners[b].add(a)
        ratios = [len(partners[p] & bfs_within(adj, p, 2)) / len(partners[p]) for p in range(200) if partners[p]]
        assert threshold_two_hop_recall(g, self.truth, 0.68) == pytest.approx(np.mean(ratios))

    def test_points_without_partners_ignored(self):
        data = Dataset(vectors=[[1.0, 0.0], [1.0, 0.01], [0.0, 1.0]])
        truth = allpairs_oracle(data, ANG, r2=0.9)
        g = SimilarityGraph.from_edges(3, [(0, 1, 0.99)])
        assert threshold_two_hop_recall(g, truth, 0.9) == 1.0

    def test_needs_threshold_truth(self):
        truth = allpairs_oracle(self.data, ANG, k=3)
        with pytest.raises(ValueError):
            threshold_two_hop_recall(SimilarityGraph(200), truth, 0.5)


class TestAnnRecall:
    def setup_method(self):
        self.data = gen_gaussian_mixture(MixtureSpec(n=250, dim=12, modes=5, seed=3))
        self.truth = allpairs_oracle(self.data, ANG, k=10, inv_eps=(1.0, 1.01))

    def test_star_at_every_point(self):
        g = _knn_star_graph(self.truth, self.data)
        assert ann_two_hop_recall(g, self.truth, 10, 1.0) == 1.0
        assert knn_recall(g, self.truth, hops=1) == 1.0

    def test_empty(self):
        assert ann_two_hop_recall(SimilarityGraph(250), self.truth, 10, 1.01) == 0.0

    def test_relaxation_monotone(self):
        cfg = SortingConfig(k=10, window=20, sketch_dim=8, repetitions=2, leaders=3, degree_cap=10)
        g, _ = build_knn_spanner(self.data, ANG, SimHash(0), cfg)
        exact = ann_two_hop_recall(g, self.truth, 10, 1.0)
        relaxed = ann_two_hop_recall(g, self.truth, 10, 1.01)
        assert 0.0 <= exact <= relaxed <= 1.0
        assert knn_recall(g, self.truth, 1) <= knn_recall(g, self.truth, 2)

    def test_matches_bfs_oracle(self):
        cfg = SortingConfig(k=10, window=20, sketch_dim=8, repetitions=2, leaders=3, degree_cap=10)
        g, _ = build_knn_spanner(self.data, ANG, SimHash(4), cfg)
        adj = adjacency_lists(g)
        ratios = []
        for p in range(250):
            allowed = set(self.truth.ann_sets[1.01][p].tolist()) | {p}
            sub = [adj[u] & allowed if u in allowed else set() for u in range(250)]
            found = bfs_within(sub, p, 2) & allowed
            ratios.append(min(len(found), 10) / 10)
        assert ann_two_hop_recall(g, self.truth, 10, 1.01) == pytest.approx(np.mean(ratios))

    def test_path_outside_induced_subgraph_does_not_count(self):
        # p-x-q with x outside A_p: q is not reachable inside the induced subgraph
        data = Dataset(vectors=[[1.0, 0.0, 0.0], [0.9, 0.1, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        truth = allpairs_oracle(data, ANG, k=1, inv_eps=(1.0,))
        assert truth.knn[0].tolist() == [1]
        g = SimilarityGraph.from_edges(4, [(0, 2, 0.5), (2, 1, 0.5)])
        # only point 2 (whose set holds both neighbours) scores; 0 and 1 would too without induction
        assert ann_two_hop_recall(g, truth, 1, 1.0) == 0.25

    def test_unknown_inv_eps(self):
        with pytest.raises(ValueError):
            ann_two_hop_recall(SimilarityGraph(250), self.truth, 10, 1.5)


class TestSparsity:
    def test_empty(self):
        assert sparsity_report(SimilarityGraph(3), [0.0, 0.5]) == {0.0: 0, 0.5: 0}

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_zero_and_monotone(self, ws):
        n = len(ws) + 1
        g = SimilarityGraph(n, np.zeros(len(ws), dtype=int), np.arange(1, n), ws)
        rep = sparsity_report(g, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert rep[0.0] == len(g)
        counts = list(rep.values())
        assert counts == sorted(counts, reverse=True)
        assert rep[0.5] == sum(w >= 0.5 for w in ws)


def test_evaluate_bundle():
    data = gen_gaussian_mixture(MixtureSpec(n=150, dim=10, modes=3, seed=9))
    truth = allpairs_oracle(data, ANG, r2=0.7, k=5, inv_eps=(1.0, 1.01))
    g = _graph_from_truth(truth, data, ANG)
    rep = evaluate(g, truth, edge_floor=0.695, inv_eps=1.01)
    assert rep.threshold_recall == 1.0
    assert rep.threshold_recall_relaxed == 1.0
    for v in (rep.knn_recall_onehop, rep.knn_recall_twohop, rep.ann_recall_twohop):
        assert 0.0 <= v <= 1.0
    assert rep.edges_at_threshold == rep.total_edges == len(g)
    assert set(rep.as_dict()) >= {"threshold_recall", "ann_recall_twohop", "total_edges"}


@settings(max_examples=10, deadline=None)
@given(st.integers(10, 80), st.integers(1, 6), st.integers(0, 999))
def test_sparse_and_dense_paths_agree(n, k, seed):
    import stars.evaluation as ev

    data = random_unit_dataset(n, 3, seed=seed)
    truth = allpairs_oracle(data, ANG, k=k, inv_eps=(1.0,))
    cfg = SortingConfig(k=k, window=6, sketch_dim=4, repetitions=2, leaders=2, degree_cap=k)
    g, _ = build_knn_spanner(data, ANG, SimHash(seed), cfg)
    dense = ann_two_hop_recall(g, truth, k, 1.0)
    old = ev._DENSE_ADJ_LIMIT
    ev._DENSE_ADJ_LIMIT = 0
    try:
        sparse = ann_two_hop_recall(g, truth, k, 1.0)
    finally:
        ev._DENSE_ADJ_LIMIT = old
    assert dense == sparse
