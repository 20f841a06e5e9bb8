"""Sorting-based LSH with star blocks: approximate k-NN graphs as two-hop spanners.

Each repetition sorts points lexicographically by an ``M``-long sketch, cuts
the sorted order into consecutive blocks (a random-length first block, then
windows of ``W``), and compares points inside each block, either star-style
against a few leaders or exhaustively. Every compared pair becomes an edge;
a per-vertex degree cap applied after the last repetition sparsifies.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .core import BuildReport, Dataset, DatasetError, SimilarityGraph, degree_cap
from .lsh import MASK64, HashFamily
from .similarity import ComparisonCounter, Measure, counted
from .threshold import all_pairs, sample_leaders, split_oversized_bucket, star_pairs

LEADERS = "leaders"
ALLPAIRS = "allpairs"
_SHIFT_TAG = 0x5417


@dataclass(frozen=True)
class Auto:
    """Pick leaders when a window is more than ``threshold`` leader budgets wide."""

    threshold: float = 2.0


@dataclass(frozen=True)
class SortingConfig:
    k: int = 100
    window: int = 250
    sketch_dim: int = 30
    repetitions: int = 25
    leaders: int = 25
    mode: str | Auto = LEADERS
    degree_cap: int = 250
    max_block_size: int = 20_000
    seed: int = 0

    def __post_init__(self):
        for name in ("k", "sketch_dim", "repetitions", "leaders", "degree_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.max_block_size < 2:
            raise ValueError("max_block_size must be >= 2")
        if not (isinstance(self.mode, Auto) or self.mode in (LEADERS, ALLPAIRS)):
            raise ValueError(f"unknown mode {self.mode!r}")


def select_mode(cfg: SortingConfig, n: int) -> str:
    if isinstance(cfg.mode, Auto):
        return LEADERS if cfg.window > cfg.mode.threshold * cfg.leaders else ALLPAIRS
    return cfg.mode


def sort_by_sketch(keys: np.ndarray, ids=None) -> np.ndarray:
    """Permutation ordering rows of ``keys`` lexicographically, ties by ascending id."""
    if not isinstance(keys, np.ndarray):
        lengths = {len(k) for k in keys}
        if len(lengths) > 1:
            raise ValueError(f"all sketch keys must have the same length, got lengths {sorted(lengths)}")
        keys = np.asarray(keys, dtype=np.uint64).reshape(len(keys), -1 if keys else 0)
    if keys.ndim != 2:
        raise ValueError("sketch keys must form an (n, M) array")
    n = keys.shape[0]
    ids = np.arange(n) if ids is None else np.asarray(ids, dtype=np.int64)
    if len(ids) != n:
        raise ValueError("ids and keys differ in length")
    cols = tuple(keys[:, j] for j in range(keys.shape[1] - 1, -1, -1))
    return ids[np.lexsort((ids, *cols))]


def shift_for(seed: int, repetition: int, window: int) -> int:
    """First-block length for one repetition, uniform in ``[ceil(W/2), W]``."""
    rng = np.random.default_rng([seed & MASK64, repetition, _SHIFT_TAG])
    return int(rng.integers(math.ceil(window / 2), window + 1))


def make_blocks(order, window: int, shift: int) -> list[np.ndarray]:
    """First ``shift`` entries of ``order``, then consecutive windows of ``window``."""
    order = np.asarray(order, dtype=np.int64)
    if not math.ceil(window / 2) <= shift <= window:
        raise ValueError(f"shift must lie in [{math.ceil(window / 2)}, {window}], got {shift}")
    if len(order) < 1:
        raise ValueError("cannot block an empty order")
    cuts = list(range(shift, len(order), window))
    return np.split(order, cuts)


def _sorting_rep(data, measure, family, cfg: SortingConfig, mode: str, rep: int):
    times = {}
    t0 = time.perf_counter()
    keys = family.sketch_dataset(data, cfg.sketch_dim, rep)
    t1 = time.perf_counter()
    order = sort_by_sketch(keys)
    blocks = make_blocks(order, cfg.window, shift_for(cfg.seed, rep, cfg.window))
    t2 = time.perf_counter()
    times["sketch"] = t1 - t0
    times["sort"] = t2 - t1
    pa, pb = [], []
    for bi, block in enumerate(blocks):
        for j, sub in enumerate(split_oversized_bucket(block, cfg.max_block_size, (cfg.seed, rep, bi))):
            if len(sub) < 2:
                continue
            if mode == ALLPAIRS:
                a, b = all_pairs(sub)
            else:
                a, b = star_pairs(sub, sample_leaders(len(sub), cfg.leaders, (cfg.seed, rep, bi, j)))
            pa.append(a)
            pb.append(b)
    if pa:
        a = np.concatenate(pa)
        b = np.concatenate(pb)
    else:
        a = b = np.empty(0, dtype=np.int64)
    t3 = time.perf_counter()
    times["bucket"] = t3 - t2
    w = measure.pairs(data, a, b)
    times["compare"] = time.perf_counter() - t3
    return np.minimum(a, b), np.maximum(a, b), w, times


def build_knn_spanner(
    dataset: Dataset, measure: Measure, family: HashFamily, cfg: SortingConfig, threads: int | None = None
) -> tuple[SimilarityGraph, BuildReport]:
    """Approximate k-NN graph whose near neighbours are mostly within two hops.

    No similarity threshold is applied: every compared pair is an edge until
    :func:`degree_cap` keeps each vertex's ``cfg.degree_cap`` heaviest edges.
    """
    if dataset is None or dataset.n < 1:
        raise DatasetError("cannot build a graph over an empty dataset")
    measure.check(dataset)
    family.check(dataset)
    family.warn_if_mismatched(measure)
    mode = select_mode(cfg, dataset.n)
    counter = ComparisonCounter()
    cm = counted(measure, counter)
    wall0 = time.perf_counter()
    results = ordered_map(
        lambda rep: _sorting_rep(dataset, cm, family, cfg, mode, rep), range(cfg.repetitions), threads
    )
    report = BuildReport()
    t = time.perf_counter()
    a = np.concatenate([r[0] for r in results])
    b = np.concatenate([r[1] for r in results])
    w = np.concatenate([r[2] for r in results])
    merged = SimilarityGraph(dataset.n, a, b, w)
    report.add_time("merge", time.perf_counter() - t)
    t = time.perf_counter()
    graph = degree_cap(merged, cfg.degree_cap)
    report.add_time("degree_cap", time.perf_counter() - t)
    for r in results:
        for phase, sec in r[3].items():
            report.add_time(phase, sec)
    report.comparisons = counter.count
    report.hash_evals = dataset.n * cfg.sketch_dim * cfg.repetitions
    report.edges_emitted = len(a)
    report.edges_final = len(graph)
    report.compute_time = sum(report.phase_times.values())
    report.wall_time = time.perf_counter() - wall0
    return graph, report
