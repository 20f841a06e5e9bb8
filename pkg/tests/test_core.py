import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import adjacency_lists, bfs_within
from stars.core import (
    BuildReport,
    Dataset,
    DatasetError,
    Edge,
    InvalidEdgeError,
    SimilarityGraph,
    degree_cap,
    format_graph,
    graph_insert,
    read_graph,
    two_hop_neighborhood,
    two_hop_reach,
    write_graph,
)


@st.composite
def graphs(draw, max_n=30):
    n = draw(st.integers(2, max_n))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4 * n))
    pairs = [(a, b) for a, b in pairs if a != b]
    # few distinct weights so ties are common
    weights = draw(st.lists(st.sampled_from([0.1, 0.25, 0.5, 0.75, 0.9]), min_size=len(pairs), max_size=len(pairs)))
    # weights must be a function of the pair, as with a real measure
    wmap = {}
    for (a, b), w in zip(pairs, weights):
        wmap.setdefault((min(a, b), max(a, b)), w)
    edges = [(a, b, wmap[(min(a, b), max(a, b))]) for a, b in pairs]
    return SimilarityGraph.from_edges(n, edges)


class TestGraphInsert:
    def test_into_empty(self):
        g = graph_insert(SimilarityGraph(5), Edge(1, 2, 0.7))
        assert len(g) == 1 and g.weight_of(1, 2) == 0.7

    def test_reinsert_other_orientation(self):
        g = graph_insert(graph_insert(SimilarityGraph(5), (2, 1, 0.7)), (1, 2, 0.7))
        assert len(g) == 1
        assert (int(g.a[0]), int(g.b[0])) == (1, 2)

    def test_first_write_wins(self):
        g = graph_insert(graph_insert(SimilarityGraph(5), (1, 2, 0.7)), (2, 1, 0.3))
        assert g.weight_of(1, 2) == 0.7

    def test_self_loop(self):
        with pytest.raises(InvalidEdgeError):
            graph_insert(SimilarityGraph(5), (3, 3, 0.9))

    @pytest.mark.parametrize("edge", [(0, 5, 0.1), (-1, 2, 0.1)])
    def test_out_of_range(self, edge):
        with pytest.raises(InvalidEdgeError):
            graph_insert(SimilarityGraph(5), edge)

    def test_constructor_validates(self):
        with pytest.raises(InvalidEdgeError):
            SimilarityGraph(3, [0], [3], [0.5])
        with pytest.raises(InvalidEdgeError):
            SimilarityGraph(3, [1], [1], [0.5])


@given(graphs())
def test_canonical_storage(g):
    assert np.all(g.a < g.b)
    pairs = list(zip(g.a.tolist(), g.b.tolist()))
    assert pairs == sorted(set(pairs))


def _degree_cap_oracle(graph, cap):
    incident = [[] for _ in range(graph.n)]
    for e in graph.edges():
        incident[e.a].append((-e.weight, e.b, (e.a, e.b)))
        incident[e.b].append((-e.weight, e.a, (e.a, e.b)))
    keep = set()
    for lst in incident:
        keep.update(key for _, _, key in sorted(lst)[:cap])
    return keep


class TestDegreeCap:
    def test_star(self):
        g = SimilarityGraph.from_edges(6, [(0, i + 1, w) for i, w in enumerate([0.9, 0.8, 0.7, 0.6, 0.5])])
        # leaves each have degree 1, so every edge is in some endpoint's top 3
        assert len(degree_cap(g, 3)) == 5
        capped = degree_cap(g, 3)
        hub_view = sorted(capped.w.tolist(), reverse=True)[:3]
        assert hub_view == [0.9, 0.8, 0.7]

    def test_star_edges_ranked_by_both_ends(self):
        # leaves connected among themselves with heavier edges push the hub edges out
        edges = [(0, i + 1, w) for i, w in enumerate([0.9, 0.8, 0.7, 0.6, 0.5])]
        edges += [(4, 6, 0.99), (5, 6, 0.99), (4, 7, 0.98), (5, 7, 0.98), (4, 8, 0.97), (5, 8, 0.97)]
        g = degree_cap(SimilarityGraph.from_edges(9, edges), 3)
        hub = sorted(g.weight_of(0, j) for j in range(1, 6) if g.weight_of(0, j) is not None)
        assert hub == [0.7, 0.8, 0.9]

    def test_max_degree_below_cap_is_identity(self):
        g = SimilarityGraph.from_edges(4, [(0, 1, 0.3), (1, 2, 0.4), (2, 3, 0.5)])
        assert degree_cap(g, 2) == g

    def test_two_vertices(self):
        g = SimilarityGraph.from_edges(2, [(0, 1, 0.5)])
        assert degree_cap(g, 250) == g

    def test_ties_by_opposite_id(self):
        clique = SimilarityGraph.from_edges(4, [(a, b, 0.5) for a in range(4) for b in range(a + 1, 4)])
        kept = degree_cap(clique, 1).edge_set()
        # vertex v keeps its smallest-id neighbour
        assert kept == {(0, 1), (0, 2), (0, 3)}

    def test_rejects_zero_cap(self):
        with pytest.raises(ValueError):
            degree_cap(SimilarityGraph(2), 0)

    @given(graphs(), st.integers(1, 6))
    def test_matches_oracle(self, g, cap):
        assert degree_cap(g, cap).edge_set() == _degree_cap_oracle(g, cap)

    @given(graphs(), st.integers(1, 6))
    def test_idempotent(self, g, cap):
        once = degree_cap(g, cap)
        assert degree_cap(once, cap) == once


class TestTwoHop:
    def test_path(self):
        g = SimilarityGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
        assert two_hop_neighborhood(g, 0) == {1, 2}

    def test_isolated(self):
        g = SimilarityGraph.from_edges(3, [(0, 1, 1.0)])
        assert two_hop_neighborhood(g, 2) == set()

    def test_k4(self):
        g = SimilarityGraph.from_edges(4, [(a, b, 1.0) for a in range(4) for b in range(a + 1, 4)])
        for p in range(4):
            assert two_hop_neighborhood(g, p) == set(range(4)) - {p}

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            two_hop_neighborhood(SimilarityGraph(3), 3)

    @settings(max_examples=60)
    @given(graphs(max_n=100))
    def test_matches_bfs(self, g):
        adj = adjacency_lists(g)
        reach = two_hop_reach(g.adjacency, np.arange(g.n)).toarray()
        for p in range(g.n):
            expect = bfs_within(adj, p, 2)
            assert two_hop_neighborhood(g, p) == expect
            got = set(np.flatnonzero(reach[p]).tolist()) - {p}
            assert got == expect


class TestGraphFile:
    def test_format(self):
        g = SimilarityGraph.from_edges(4, [(3, 1, 0.5), (0, 2, 1 / 3)])
        assert format_graph(g) == "0\t2\t0.333333\n1\t3\t0.500000\n"

    @settings(max_examples=40)
    @given(g=graphs())
    def test_round_trip(self, tmp_path_factory, g):
        path = tmp_path_factory.mktemp("g") / "g.tsv"
        write_graph(g, path)
        back = read_graph(path, n=g.n)
        assert back.edge_set() == g.edge_set()
        np.testing.assert_allclose(back.w, g.w, atol=5e-7)

    def test_read_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("0\t1\n")
        with pytest.raises(ValueError, match=":1:"):
            read_graph(p)


class TestDataset:
    def test_needs_payload(self):
        with pytest.raises(DatasetError):
            Dataset()

    def test_non_finite(self):
        with pytest.raises(DatasetError):
            Dataset(vectors=[[1.0, np.nan]])

    def test_non_positive_weight(self):
        with pytest.raises(DatasetError):
            Dataset(sets=[{"a": 0.0}])

    def test_labels_cover_points(self):
        with pytest.raises(DatasetError):
            Dataset(vectors=[[1.0], [2.0]], labels=[0])

    def test_paired_length_mismatch(self):
        with pytest.raises(DatasetError):
            Dataset(vectors=[[1.0], [2.0]], sets=[{"a": 1.0}])

    def test_immutable(self):
        d = Dataset(vectors=[[1.0, 2.0]])
        with pytest.raises(ValueError):
            d.vectors[0, 0] = 5.0

    def test_zero_vector_has_no_direction(self):
        d = Dataset(vectors=[[0.0, 0.0], [1.0, 0.0]])
        with pytest.raises(DatasetError):
            d.unit_vectors

    def test_fingerprint_tracks_content(self):
        a = Dataset(vectors=[[1.0, 2.0]])
        b = Dataset(vectors=[[1.0, 2.0]])
        c = Dataset(vectors=[[1.0, 2.5]])
        assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_build_report_dict():
    r = BuildReport(comparisons=3, hash_evals=4, edges_emitted=2, edges_final=1)
    r.add_time("sketch", 0.5)
    r.add_time("sketch", 0.25)
    d = r.as_dict()
    assert d["time_sketch_s"] == 0.75
    assert d["edges_final"] <= d["edges_emitted"]
