"""Connected components, a threshold sweep for approximate single linkage, and V-measure."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.csgraph import connected_components as _cc

from ._parallel import ordered_map
from .core import Dataset, SimilarityGraph
from .lsh import HashFamily
from .similarity import Measure
from .threshold import ThresholdConfig, build_threshold_spanner


@dataclass(frozen=True)
class Partition:
    """Dense cluster ids; cluster ``i`` has the ``i``-th smallest minimum member id."""

    assignment: np.ndarray
    cluster_count: int

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if len(labels) == 0:
            return cls(np.empty(0, dtype=np.int64), 0)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        return cls(rank[inverse], len(first))

    @property
    def n(self) -> int:
        return len(self.assignment)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.cluster_count)

    def clusters(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        return np.split(order, np.cumsum(self.sizes())[:-1])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Partition)
            and self.cluster_count == other.cluster_count
            and np.array_equal(self.assignment, other.assignment)
        )

    __hash__ = None


def connected_components(graph: SimilarityGraph) -> Partition:
    if graph.n == 0:
        return Partition(np.empty(0, dtype=np.int64), 0)
    _, labels = _cc(graph.adjacency, directed=False)
    return Partition.from_labels(labels)


def merge_to_k(partition: Partition, k: int) -> Partition:
    """Fold the smallest cluster into the largest until ``k`` remain.

    Smallest means fewest members, then smallest minimum id; largest means
    most members, then smallest minimum id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if partition.cluster_count < k:
        raise ValueError(f"partition has {partition.cluster_count} clusters, fewer than k={k}")
    target = np.arange(partition.cluster_count)  # union target per cluster id
    sizes = partition.sizes().astype(np.int64)
    alive = set(range(partition.cluster_count))
    # cluster ids already follow ascending minimum member id
    while len(alive) > k:
        small = min(alive, key=lambda c: (sizes[c], c))
        big = min(alive - {small}, key=lambda c: (-sizes[c], c))
        sizes[big] += sizes[small]
        target[target == small] = big
        alive.remove(small)
    return Partition.from_labels(target[partition.assignment])


def _entropy(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(-np.sum(p * np.log(p)))


def homogeneity_completeness(pred, truth) -> tuple[float, float]:
    pred = pred.assignment if isinstance(pred, Partition) else np.asarray(pred)
    truth = np.asarray(truth)
    if len(pred) != len(truth):
        raise ValueError(f"prediction covers {len(pred)} points but labels cover {len(truth)}")
    if len(pred) == 0:
        return 1.0, 1.0
    _, ci = np.unique(truth, return_inverse=True)
    _, ki = np.unique(pred, return_inverse=True)
    table = np.zeros((ci.max() + 1, ki.max() + 1))
    np.add.at(table, (ci, ki), 1)
    n = table.sum()
    h_c = _entropy(table.sum(axis=1))
    h_k = _entropy(table.sum(axis=0))
    nz = table > 0
    joint = table[nz] / n
    col = np.broadcast_to(table.sum(axis=0), table.shape)[nz] / n
    row = np.broadcast_to(table.sum(axis=1)[:, None], table.shape)[nz] / n
    h_c_given_k = float(-np.sum(joint * np.log(joint / col)))
    h_k_given_c = float(-np.sum(joint * np.log(joint / row)))
    homogeneity = 1.0 if h_c == 0 else 1.0 - h_c_given_k / h_c
    completeness = 1.0 if h_k == 0 else 1.0 - h_k_given_c / h_k
    return homogeneity, completeness


def vmeasure(pred, truth) -> float:
    """Harmonic mean of homogeneity and completeness (natural-log entropies)."""
    h, c = homogeneity_completeness(pred, truth)
    if h + c == 0:
        return 0.0
    return 2.0 * h * c / (h + c)


@dataclass
class SweepLevel:
    r: float
    r1: float
    component_count: int
    partition: Partition
    comparisons: int = 0


@dataclass
class SweepResult:
    levels: list[SweepLevel] = field(default_factory=list)
    k: int | None = None
    selected: int | None = None  # index into levels

    @property
    def selected_level(self) -> SweepLevel | None:
        return None if self.selected is None else self.levels[self.selected]

    def as_dict(self) -> dict:
        out = {"k": self.k, "levels": len(self.levels)}
        if self.selected is not None:
            lv = self.levels[self.selected]
            out.update(selected_r=lv.r, selected_r1=lv.r1, selected_components=lv.component_count)
        for i, lv in enumerate(self.levels):
            out[f"level{i}_r"] = lv.r
            out[f"level{i}_components"] = lv.component_count
        return out


def geometric_grid(r_min: float, r_max: float, c: float) -> list[float]:
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    if c <= 1:
        raise ValueError("the grid ratio c must exceed 1")
    steps = int(math.floor(math.log(r_max / r_min) / math.log(c) + 1e-9))
    grid = [r_min * c**i for i in range(steps + 1)]
    if not grid:
        raise ValueError("empty threshold grid")
    return grid


def single_linkage_sweep(
    dataset: Dataset,
    measure: Measure,
    family: HashFamily,
    k: int,
    c: float,
    r_min: float,
    r_max: float,
    builder_cfg: ThresholdConfig,
    threads: int | None = None,
) -> SweepResult:
    """Build a spanner with edge floor ``r / c`` at every ``r`` on a geometric grid.

    The selected level is the smallest ``r`` whose spanner still has at least
    ``k`` components: the coarsest partition that does not undershoot ``k``.
    """
    grid = geometric_grid(r_min, r_max, c)

    def level(r):
        g, rep = build_threshold_spanner(dataset, measure, family, replace(builder_cfg, r1=r / c), threads=1)
        part = connected_components(g)
        return SweepLevel(r, r / c, part.cluster_count, part, rep.comparisons)

    levels = ordered_map(level, grid, threads)
    result = SweepResult(levels=levels, k=k)
    for i, lv in enumerate(levels):
        if lv.component_count >= k:
            result.selected = i
            break
    return result


def write_partition(partition: Partition, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, c in enumerate(partition.assignment.tolist()):
            fh.write(f"{i}\t{c}\n")
