"""Brute-force ground truth and graph quality metrics.

Recall definitions:

* threshold two-hop recall: restrict the graph to edges of weight at least
  ``edge_floor``; for each point, the share of its partners with similarity
  ``>= r2`` that sit within two hops. Points without partners are skipped.
* k-NN recall: inside the subgraph induced by ``N_k(p) + {p}``, the share
  of the exact k nearest neighbours within one (or two) hops.
* ANN two-hop recall: inside the subgraph induced by ``A_p + {p}``, where
  ``A_p`` holds every ``q`` with ``1 - mu(p, q) <= inv_eps * (1 - tau_k(p))``,
  ``min(found, k) / k``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import Dataset, SimilarityGraph, two_hop_reach
from .similarity import ComparisonCounter, Measure, pairwise_rows, unwrap

_DENSE_ADJ_LIMIT = 20_000


@dataclass
class GroundTruth:
    """Exact neighbourhood structure from an all-pairs pass."""

    n: int
    r2: float | None = None
    threshold_a: np.ndarray | None = None
    threshold_b: np.ndarray | None = None
    k: int | None = None
    knn: np.ndarray | None = None
    knn_sims: np.ndarray | None = None
    ann_sets: dict[float, list[np.ndarray]] = field(default_factory=dict)
    comparisons: int = 0

    def threshold_graph(self) -> SimilarityGraph:
        """The exact ``r2``-threshold graph (unit weights)."""
        return SimilarityGraph(self.n, self.threshold_a, self.threshold_b, np.ones(len(self.threshold_a)), _trusted=True)

    def partners(self) -> sp.csr_matrix:
        rows = np.concatenate([self.threshold_a, self.threshold_b])
        cols = np.concatenate([self.threshold_b, self.threshold_a])
        return sp.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(self.n, self.n))


def top_k_row(sims: np.ndarray, k: int, exclude: int | None = None) -> np.ndarray:
    """Ids of the ``k`` largest entries, descending, ties to the smaller id."""
    sims = np.asarray(sims, dtype=np.float64)
    if exclude is not None:
        sims = sims.copy()
        sims[exclude] = -np.inf
    n_valid = len(sims) - (exclude is not None)
    k = min(k, n_valid)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k < len(sims):
        kth = np.partition(sims, len(sims) - k)[len(sims) - k]
        cand = np.flatnonzero(sims >= kth)
    else:
        cand = np.arange(len(sims))
    order = np.lexsort((cand, -sims[cand]))
    return cand[order[:k]]


# Largest gap between a block-product value and the exact pair kernel.
_BLOCK_SLACK = 1e-6


def _rescore(measure, data, p, cand):
    return measure.pairs(data, np.full(len(cand), p), cand)


def _exact_top_k(measure, data, row, p, k):
    """Top-``k`` of ``row`` re-ranked with the builders' pair kernel.

    Re-scoring a slightly padded candidate set resolves ties and near-ties
    exactly as ``degree_cap`` resolves them on builder weights.
    """
    if k == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    row = row.copy()
    row[p] = -np.inf
    kth = np.partition(row, len(row) - k)[len(row) - k]
    cand = np.flatnonzero(row >= kth - _BLOCK_SLACK)
    cand = cand[cand != p]
    w = _rescore(measure, data, p, cand)
    order = np.lexsort((cand, -w))[:k]
    return cand[order], w[order]


def _exact_at_least(measure, data, p, row, cutoff, lo_mask=None):
    """Ids ``q != p`` with exact similarity ``>= cutoff``; only near-boundary entries are re-scored."""
    sure = row >= cutoff + _BLOCK_SLACK
    near = (row >= cutoff - _BLOCK_SLACK) & ~sure
    if lo_mask is not None:
        sure &= lo_mask
        near &= lo_mask
    sure[p] = near[p] = False
    cand = np.flatnonzero(near)
    keep = cand[_rescore(measure, data, p, cand) >= cutoff] if len(cand) else cand
    return np.union1d(np.flatnonzero(sure), keep)


def allpairs_oracle(
    dataset: Dataset,
    measure: Measure,
    r2: float | None = None,
    k: int | None = None,
    inv_eps=(1.0,),
    counter: ComparisonCounter | None = None,
    chunk: int = 256,
) -> GroundTruth:
    """Exhaustive ground truth. Costs ``n(n-1)/2`` similarity evaluations.

    Rows come from fast block products; entries within rounding distance of
    a decision boundary are re-scored with the pair kernel the builders use,
    so oracle and builders agree on every comparison. Re-scoring is not
    counted as extra comparisons.
    """
    measure.check(dataset)
    exact = unwrap(measure)
    n = dataset.n
    truth = GroundTruth(n=n, r2=r2, k=k)
    ta, tb = [], []
    kk = None if k is None else min(k, n - 1)
    if kk is not None:
        truth.knn = np.empty((n, kk), dtype=np.int64)
        truth.knn_sims = np.empty((n, kk))
        inv_eps = tuple(float(e) for e in inv_eps)
        for e in inv_eps:
            if e < 1:
                raise ValueError("inv_eps must be >= 1")
            truth.ann_sets[e] = [None] * n
    cols = np.arange(n)
    pairs = 0
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        block = pairwise_rows(measure, dataset, rows)
        pairs += int(np.sum(n - 1 - rows))
        for r, p in enumerate(rows.tolist()):
            row = block[r]
            if r2 is not None:
                partners = _exact_at_least(exact, dataset, p, row, r2, lo_mask=cols > p)
                ta.append(np.full(len(partners), p))
                tb.append(partners)
            if kk is not None:
                nn, nn_sims = _exact_top_k(exact, dataset, row, p, kk)
                truth.knn[p] = nn
                truth.knn_sims[p] = nn_sims
                dk = 1.0 - nn_sims[-1] if kk > 0 else 0.0
                for e in truth.ann_sets:
                    # 1 - mu <= e * dk  <=>  mu >= 1 - e * dk
                    members = _exact_at_least(exact, dataset, p, row, 1.0 - e * dk)
                    truth.ann_sets[e][p] = np.union1d(members, nn)
    if r2 is not None:
        truth.threshold_a = np.concatenate(ta).astype(np.int64) if ta else np.empty(0, dtype=np.int64)
        truth.threshold_b = np.concatenate(tb).astype(np.int64) if tb else np.empty(0, dtype=np.int64)
    truth.comparisons = pairs
    if counter is not None:
        counter.add(pairs)
    return truth


def threshold_two_hop_recall(
    graph: SimilarityGraph, truth: GroundTruth, edge_floor: float, chunk: int = 512
) -> float:
    """Mean share of ``>= r2`` partners reachable in two hops over edges ``>= edge_floor``."""
    if truth.threshold_a is None:
        raise ValueError("ground truth was built without a threshold")
    adj = graph.filter(edge_floor).adjacency
    part = truth.partners()
    total = 0.0
    counted = 0
    for start in range(0, graph.n, chunk):
        rows = np.arange(start, min(graph.n, start + chunk))
        pr = part[rows]
        need = np.diff(pr.indptr)
        if not need.any():
            continue
        hits = np.asarray(two_hop_reach(adj, rows).multiply(pr).sum(axis=1)).ravel()
        has = need > 0
        total += float(np.sum(hits[has] / need[has]))
        counted += int(has.sum())
    return total / counted if counted else 0.0


def _reach_counts(graph: SimilarityGraph, sets, hops: int) -> np.ndarray:
    """For each ``p``, how many of ``sets[p]`` lie within ``hops`` of ``p`` in the subgraph induced by ``sets[p] + {p}``."""
    out = np.zeros(graph.n, dtype=np.int64)
    if len(graph) == 0:
        return out
    if graph.n <= _DENSE_ADJ_LIMIT:
        dense = graph.adjacency.toarray()

        def sub(rows, cols):
            return dense[np.ix_(rows, cols)]

        def row(p, cols):
            return dense[p, cols]
    else:
        adj = graph.adjacency

        def sub(rows, cols):
            return adj[rows][:, cols].toarray()

        def row(p, cols):
            return adj[p][:, cols].toarray().ravel()

    for p in range(graph.n):
        s = np.asarray(sets[p], dtype=np.int64)
        if len(s) == 0:
            continue
        direct = row(p, s)
        found = direct.copy()
        if hops >= 2 and direct.any():
            found |= sub(s[direct], s).any(axis=0)
        out[p] = int(found.sum())
    return out


def knn_recall(graph: SimilarityGraph, truth: GroundTruth, hops: int = 2) -> float:
    """Mean share of the exact k-NN reachable within ``hops`` inside the k-NN-induced subgraph."""
    if truth.knn is None:
        raise ValueError("ground truth was built without k")
    kk = truth.knn.shape[1]
    if kk == 0:
        return 0.0
    counts = _reach_counts(graph, truth.knn, hops)
    return float(np.mean(counts / kk))


def ann_two_hop_recall(graph: SimilarityGraph, truth: GroundTruth, k: int | None = None, inv_eps: float = 1.01) -> float:
    """Mean of ``min(found, k) / k`` over points, where ``found`` counts ``A_p`` members within two hops."""
    inv_eps = float(inv_eps)
    if inv_eps not in truth.ann_sets:
        raise ValueError(f"ground truth has no approximate-neighbour sets for inv_eps={inv_eps}")
    k = truth.k if k is None else k
    k = min(k, graph.n - 1)
    if k <= 0:
        return 0.0
    counts = _reach_counts(graph, truth.ann_sets[inv_eps], 2)
    return float(np.mean(np.minimum(counts, k) / k))


def sparsity_report(graph: SimilarityGraph, thresholds) -> dict[float, int]:
    """Number of edges with weight ``>= t`` for each ``t``."""
    w = np.sort(graph.w)
    return {float(t): int(len(w) - np.searchsorted(w, t, side="left")) for t in thresholds}


@dataclass
class EvalReport:
    threshold_recall: float | None = None
    threshold_recall_relaxed: float | None = None
    knn_recall_onehop: float | None = None
    knn_recall_twohop: float | None = None
    ann_recall_twohop: float | None = None
    edges_at_threshold: int | None = None
    total_edges: int = 0

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def evaluate(
    graph: SimilarityGraph,
    truth: GroundTruth,
    edge_floor: float | None = None,
    inv_eps: float | None = None,
) -> EvalReport:
    """Every metric ``truth`` supports. ``edge_floor`` drives the relaxed threshold recall."""
    rep = EvalReport(total_edges=len(graph))
    if truth.r2 is not None:
        rep.threshold_recall = threshold_two_hop_recall(graph, truth, truth.r2)
        if edge_floor is not None:
            rep.threshold_recall_relaxed = threshold_two_hop_recall(graph, truth, edge_floor)
        rep.edges_at_threshold = sparsity_report(graph, [truth.r2])[truth.r2]
    if truth.k is not None:
        rep.knn_recall_onehop = knn_recall(graph, truth, hops=1)
        rep.knn_recall_twohop = knn_recall(graph, truth, hops=2)
        if inv_eps is not None:
            rep.ann_recall_twohop = ann_two_hop_recall(graph, truth, truth.k, inv_eps)
    return rep
