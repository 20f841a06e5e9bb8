"""Datasets, similarity graphs and build counters shared by every builder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class InvalidEdgeError(ValueError):
    """Raised for self-loops or endpoints outside ``[0, n)``."""


class DatasetError(ValueError):
    """Raised for malformed or inconsistent point collections."""


WeightedSet = Mapping[str, float]


class Dataset:
    """A fixed collection of points with ids ``0..n-1``.

    A point carries a dense vector, a weighted token set, or both (a paired
    point, used by the mixture measure). All points share the same payload
    kinds and, for vectors, the same dimension.

    Args:
        vectors: ``(n, d)`` array of finite reals, or ``None``.
        sets: sequence of ``token -> weight`` maps with strictly positive
            weights, or ``None``.
        labels: optional class label per point.
    """

    def __init__(
        self,
        vectors: np.ndarray | Sequence[Sequence[float]] | None = None,
        sets: Sequence[WeightedSet] | None = None,
        labels: Sequence | np.ndarray | None = None,
    ):
        if vectors is None and sets is None:
            raise DatasetError("a dataset needs vectors, sets, or both")
        n = None
        if vectors is not None:
            vectors = np.array(vectors, dtype=np.float64)
            if vectors.ndim != 2 or vectors.shape[1] == 0:
                raise DatasetError(f"vectors must be a non-empty (n, d) array, got shape {vectors.shape}")
            if not np.all(np.isfinite(vectors)):
                raise DatasetError("vectors must be finite")
            vectors.setflags(write=False)
            n = vectors.shape[0]
        if sets is not None:
            frozen = []
            for i, s in enumerate(sets):
                d = {str(t): float(w) for t, w in dict(s).items()}
                if any(not (w > 0 and math.isfinite(w)) for w in d.values()):
                    raise DatasetError(f"point {i}: set weights must be finite and strictly positive")
                frozen.append(d)
            if n is not None and len(frozen) != n:
                raise DatasetError(f"paired payloads disagree on n: {n} vectors, {len(frozen)} sets")
            sets = tuple(frozen)
            n = len(sets)
        if n is None or n < 1:
            raise DatasetError("a dataset needs at least one point")
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (n,):
                raise DatasetError(f"labels must cover all {n} points, got {labels.shape}")
            labels.setflags(write=False)
        self.vectors: np.ndarray | None = vectors
        self.sets: tuple[dict[str, float], ...] | None = sets
        self.labels: np.ndarray | None = labels
        self.n: int = n

    @classmethod
    def paired(cls, dense: "Dataset", sets: "Dataset") -> "Dataset":
        """Combine a vector dataset and a set dataset with aligned ids."""
        if dense.vectors is None or sets.sets is None:
            raise DatasetError("paired() needs a vector dataset and a set dataset")
        labels = dense.labels if dense.labels is not None else sets.labels
        return cls(vectors=dense.vectors, sets=sets.sets, labels=labels)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        kinds = [k for k, v in (("vectors", self.vectors), ("sets", self.sets)) if v is not None]
        return f"Dataset(n={self.n}, payload={'+'.join(kinds)})"

    @property
    def dim(self) -> int | None:
        return None if self.vectors is None else self.vectors.shape[1]

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.vectors, self.sets, labels)

    def subset(self, ids: Sequence[int]) -> "Dataset":
        ids = list(ids)
        return Dataset(
            None if self.vectors is None else self.vectors[ids],
            None if self.sets is None else [self.sets[i] for i in ids],
            None if self.labels is None else self.labels[ids],
        )

    @cached_property
    def unit_vectors(self) -> np.ndarray:
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise DatasetError(f"point {bad} is a zero vector; the angle to it is undefined")
        u = self.vectors / norms[:, None]
        u.setflags(write=False)
        return u

    @cached_property
    def token_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(s) for s in self.sets)

    def fingerprint(self) -> str:
        """Short content digest used in run manifests."""
        import hashlib

        h = hashlib.blake2b(digest_size=16)
        h.update(str(self.n).encode())
        if self.vectors is not None:
            h.update(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes())
        if self.sets is not None:
            for s in self.sets:
                for t in sorted(s):
                    h.update(f"{t}\x1f{s[t]!r}\x1e".encode())
                h.update(b"\x1d")
        return h.hexdigest()


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    weight: float

    def canonical(self) -> "Edge":
        return self if self.a < self.b else Edge(self.b, self.a, self.weight)


class SimilarityGraph:
    """Undirected weighted graph over point ids, stored as sorted edge arrays.

    Edges are canonical (``a < b``), unique, and sorted by ``(a, b)``. The
    arrays are read-only; "mutating" operations return new graphs.
    """

    def __init__(self, n: int, a=(), b=(), w=(), *, _trusted: bool = False):
        if n < 0:
            raise ValueError("n must be non-negative")
        a = np.asarray(a, dtype=np.int64).ravel()
        b = np.asarray(b, dtype=np.int64).ravel()
        w = np.asarray(w, dtype=np.float64).ravel()
        if not _trusted:
            if not (a.shape == b.shape == w.shape):
                raise ValueError("edge arrays must have equal length")
            a, b, w = _canonicalize(n, a, b, w)
        for arr in (a, b, w):
            arr.setflags(write=False)
        self.n = int(n)
        self.a = a
        self.b = b
        self.w = w

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge | tuple]) -> "SimilarityGraph":
        rows = [(e.a, e.b, e.weight) if isinstance(e, Edge) else tuple(e) for e in edges]
        if not rows:
            return cls(n)
        a, b, w = zip(*rows)
        return cls(n, a, b, w)

    def __len__(self) -> int:
        return len(self.a)

    @property
    def num_edges(self) -> int:
        return len(self.a)

    def __repr__(self) -> str:
        return f"SimilarityGraph(n={self.n}, edges={len(self)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimilarityGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.w, other.w)
        )

    def edges(self) -> list[Edge]:
        return [Edge(int(x), int(y), float(z)) for x, y, z in zip(self.a, self.b, self.w)]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.a.tolist(), self.b.tolist()))

    def weight_of(self, a: int, b: int) -> float | None:
        if a > b:
            a, b = b, a
        lo = np.searchsorted(self.a, a, side="left")
        hi = np.searchsorted(self.a, a, side="right")
        j = lo + np.searchsorted(self.b[lo:hi], b)
        if j < hi and self.b[j] == b:
            return float(self.w[j])
        return None

    def degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.a, self.b]), minlength=self.n)

    def filter(self, min_weight: float) -> "SimilarityGraph":
        """Sub-graph of edges with weight >= ``min_weight``."""
        keep = self.w >= min_weight
        return SimilarityGraph(self.n, self.a[keep], self.b[keep], self.w[keep], _trusted=True)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric boolean CSR adjacency matrix."""
        rows = np.concatenate([self.a, self.b])
        cols = np.concatenate([self.b, self.a])
        data = np.ones(len(rows), dtype=bool)
        m = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        m.sort_indices()
        return m

    def neighbors(self, p: int) -> np.ndarray:
        adj = self.adjacency
        return adj.indices[adj.indptr[p] : adj.indptr[p + 1]]


def _canonicalize(n, a, b, w):
    if len(a) == 0:
        return a, b, w
    if np.any(a == b):
        i = int(np.flatnonzero(a == b)[0])
        raise InvalidEdgeError(f"self-loop on vertex {int(a[i])}")
    if a.min() < 0 or b.min() < 0 or a.max() >= n or b.max() >= n:
        raise InvalidEdgeError(f"edge endpoint outside [0, {n})")
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    # stable sort keeps the first occurrence of a duplicate pair first
    order = np.lexsort((hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    first = np.ones(len(lo), dtype=bool)
    first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    return lo[first], hi[first], w[first]


def graph_insert(graph: SimilarityGraph, e: Edge | tuple) -> SimilarityGraph:
    """Return ``graph`` plus edge ``e``; re-inserting an existing pair keeps the old weight."""
    if not isinstance(e, Edge):
        e = Edge(*e)
    if e.a == e.b:
        raise InvalidEdgeError(f"self-loop on vertex {e.a}")
    if not (0 <= e.a < graph.n and 0 <= e.b < graph.n):
        raise InvalidEdgeError(f"edge ({e.a}, {e.b}) has an endpoint outside [0, {graph.n})")
    return SimilarityGraph(
        graph.n,
        np.append(graph.a, e.a),
        np.append(graph.b, e.b),
        np.append(graph.w, e.weight),
    )


def degree_cap(graph: SimilarityGraph, cap: int) -> SimilarityGraph:
    """Keep an edge iff it is among the ``cap`` heaviest edges of at least one endpoint.

    Ties in weight are broken by the smaller opposite-endpoint id.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    m = len(graph)
    if m == 0:
        return graph
    src = np.concatenate([graph.a, graph.b])
    dst = np.concatenate([graph.b, graph.a])
    wt = np.concatenate([graph.w, graph.w])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((dst, -wt, src))
    src_sorted = src[order]
    starts = np.flatnonzero(np.r_[True, src_sorted[1:] != src_sorted[:-1]])
    group_start = np.repeat(starts, np.diff(np.r_[starts, len(src_sorted)]))
    rank = np.arange(len(src_sorted)) - group_start
    keep = np.zeros(m, dtype=bool)
    keep[eid[order][rank < cap]] = True
    return SimilarityGraph(graph.n, graph.a[keep], graph.b[keep], graph.w[keep], _trusted=True)


def two_hop_neighborhood(graph: SimilarityGraph, p: int) -> set[int]:
    """Vertices at unweighted distance 1 or 2 from ``p``, excluding ``p``."""
    if not 0 <= p < graph.n:
        raise IndexError(f"vertex {p} outside [0, {graph.n})")
    adj = graph.adjacency
    one = graph.neighbors(p)
    if len(one) == 0:
        return set()
    two = adj[one].indices
    out = set(one.tolist())
    out.update(two.tolist())
    out.discard(p)
    return out


def two_hop_reach(adjacency: sp.csr_matrix, rows: np.ndarray) -> sp.csr_matrix:
    """Boolean rows of the one-or-two-hop reachability matrix for ``rows``."""
    sub = adjacency[rows]
    reach = sub.astype(np.int32) @ adjacency.astype(np.int32)
    reach = (reach + sub.astype(np.int32)).astype(bool)
    return reach.tocsr()


@dataclass
class BuildReport:
    """Counters gathered while building one graph."""

    comparisons: int = 0
    hash_evals: int = 0
    edges_emitted: int = 0
    edges_final: int = 0
    phase_times: dict[str, float] = field(default_factory=dict)
    compute_time: float = 0.0
    wall_time: float = 0.0

    def add_time(self, phase: str, seconds: float) -> None:
        self.phase_times[phase] = self.phase_times.get(phase, 0.0) + seconds

    def as_dict(self) -> dict:
        out = {
            "comparisons": self.comparisons,
            "hash_evals": self.hash_evals,
            "edges_emitted": self.edges_emitted,
            "edges_final": self.edges_final,
            "compute_time_s": round(self.compute_time, 6),
            "wall_time_s": round(self.wall_time, 6),
        }
        for k, v in sorted(self.phase_times.items()):
            out[f"time_{k}_s"] = round(v, 6)
        return out


def write_graph(graph: SimilarityGraph, path) -> None:
    """Write ``a<TAB>b<TAB>weight`` lines sorted by ``(a, b)``, weights to 6 decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(graph))


def format_graph(graph: SimilarityGraph) -> str:
    return "".join(f"{a}\t{b}\t{w:.6f}\n" for a, b, w in zip(graph.a.tolist(), graph.b.tolist(), graph.w.tolist()))


def read_graph(path, n: int | None = None) -> SimilarityGraph:
    a, b, w = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                a.append(int(parts[0]))
                b.append(int(parts[1]))
                w.append(float(parts[2]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if n is None:
        n = max(max(a, default=-1), max(b, default=-1)) + 1
    return SimilarityGraph(n, a, b, w)
