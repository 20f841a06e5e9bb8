"""LSH bucketing with leader sampling: approximate threshold graphs as two-hop spanners.

Each repetition sketches every point, groups equal sketches into buckets,
splits oversized buckets at random, and inside every bucket compares a few
sampled leaders against the rest. A pair becomes an edge when its similarity
reaches ``r1``. Repetition ``r`` only depends on ``(seed, r)``, so building
with more repetitions only ever adds edges.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._parallel import ordered_map
from .core import BuildReport, Dataset, DatasetError, SimilarityGraph
from .lsh import MASK64, HashFamily, bucket_key, group_rows
from .similarity import ComparisonCounter, Measure, counted

_LEADER_TAG = 0x1EAD
_SPLIT_TAG = 0x5B17


@dataclass(frozen=True)
class ThresholdConfig:
    r1: float
    repetitions: int = 25
    leaders: int = 25
    max_bucket_size: int = 10_000
    sketch_len: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.leaders < 1:
            raise ValueError("leaders must be >= 1")
        if self.max_bucket_size < 2:
            raise ValueError("max_bucket_size must be >= 2")
        if self.sketch_len < 1:
            raise ValueError("sketch_len must be >= 1")


def split_oversized_bucket(bucket, cap: int, rng_key) -> list[np.ndarray]:
    """Shuffle ``bucket`` with a generator seeded by ``rng_key`` and chop it into chunks of <= ``cap``."""
    if cap < 2:
        raise ValueError("cap must be >= 2")
    bucket = np.asarray(bucket, dtype=np.int64)
    if len(bucket) <= cap:
        return [bucket]
    rng = np.random.default_rng([*(int(k) & MASK64 for k in rng_key), _SPLIT_TAG])
    shuffled = bucket[rng.permutation(len(bucket))]
    return [shuffled[i : i + cap] for i in range(0, len(shuffled), cap)]


def sample_leaders(m: int, s: int, rng_key) -> np.ndarray:
    """Sorted positions of ``min(s, m)`` leaders drawn without replacement."""
    if s >= m:
        return np.arange(m)
    rng = np.random.default_rng([*(int(k) & MASK64 for k in rng_key), _LEADER_TAG])
    return np.sort(rng.choice(m, size=s, replace=False))


def star_pairs(members: np.ndarray, leader_pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Leader-leader pairs (each once) plus every leader-member pair."""
    m = len(members)
    s = len(leader_pos)
    if s >= m:
        return all_pairs(members)
    is_leader = np.zeros(m, dtype=bool)
    is_leader[leader_pos] = True
    leaders = members[leader_pos]
    others = members[~is_leader]
    li, lj = _triu(s)
    a = np.concatenate([leaders[li], np.repeat(leaders, len(others))])
    b = np.concatenate([leaders[lj], np.tile(others, s)])
    return a, b


@lru_cache(maxsize=512)
def _triu(m: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(m, k=1)
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def all_pairs(members: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i, j = _triu(len(members)) if len(members) <= 4096 else np.triu_indices(len(members), k=1)
    return members[i], members[j]


def star_comparisons(m: int, s: int) -> int:
    """Comparisons a bucket of ``m`` points costs with ``s`` leaders."""
    if m < 2:
        return 0
    if s >= m:
        return m * (m - 1) // 2
    return s * (m - s) + s * (s - 1) // 2


@dataclass
class _RepResult:
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray
    comparisons: int
    times: dict = field(default_factory=dict)


def _bucket_members(inverse: np.ndarray):
    order = np.argsort(inverse, kind="stable")
    counts = np.bincount(inverse)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    for u in np.flatnonzero(counts >= 2):
        yield int(u), order[starts[u] : starts[u] + counts[u]]


def _threshold_rep(data, measure, family, cfg: ThresholdConfig, rep: int, exhaustive: bool) -> _RepResult:
    times = {}
    t0 = time.perf_counter()
    keys = family.sketch_dataset(data, cfg.sketch_len, rep)
    t1 = time.perf_counter()
    times["sketch"] = t1 - t0
    uniq, inverse = group_rows(keys)
    pa, pb = [], []
    for u, members in _bucket_members(inverse):
        m = len(members)
        if m <= cfg.max_bucket_size and (exhaustive or m <= cfg.leaders):
            # no randomness needed: the whole bucket is compared
            a, b = all_pairs(members)
            pa.append(a)
            pb.append(b)
            continue
        bid = bucket_key(uniq[u])
        subs = split_oversized_bucket(members, cfg.max_bucket_size, (cfg.seed, rep, bid))
        for j, sub in enumerate(subs):
            if len(sub) < 2:
                continue
            if exhaustive:
                a, b = all_pairs(sub)
            else:
                a, b = star_pairs(sub, sample_leaders(len(sub), cfg.leaders, (cfg.seed, rep, bid, j)))
            pa.append(a)
            pb.append(b)
    t2 = time.perf_counter()
    times["bucket"] = t2 - t1
    if pa:
        a = np.concatenate(pa)
        b = np.concatenate(pb)
    else:
        a = b = np.empty(0, dtype=np.int64)
    w = measure.pairs(data, a, b)
    keep = w >= cfg.r1
    lo = np.minimum(a, b)[keep]
    hi = np.maximum(a, b)[keep]
    times["compare"] = time.perf_counter() - t2
    return _RepResult(lo, hi, w[keep], len(a), times)


def _build(dataset: Dataset, measure: Measure, family: HashFamily, cfg: ThresholdConfig, exhaustive: bool, threads):
    if dataset is None or dataset.n < 1:
        raise DatasetError("cannot build a graph over an empty dataset")
    measure.check(dataset)
    family.check(dataset)
    family.warn_if_mismatched(measure)
    counter = ComparisonCounter()
    cm = counted(measure, counter)
    wall0 = time.perf_counter()
    results = ordered_map(
        lambda rep: _threshold_rep(dataset, cm, family, cfg, rep, exhaustive),
        range(cfg.repetitions),
        threads,
    )
    report = BuildReport()
    t_merge = time.perf_counter()
    a = np.concatenate([r.a for r in results])
    b = np.concatenate([r.b for r in results])
    w = np.concatenate([r.w for r in results])
    graph = SimilarityGraph(dataset.n, a, b, w)
    report.add_time("merge", time.perf_counter() - t_merge)
    for r in results:
        for k, v in r.times.items():
            report.add_time(k, v)
    report.comparisons = counter.count
    assert report.comparisons == sum(r.comparisons for r in results)
    report.hash_evals = dataset.n * cfg.sketch_len * cfg.repetitions
    report.edges_emitted = len(a)
    report.edges_final = len(graph)
    report.compute_time = sum(report.phase_times.values())
    report.wall_time = time.perf_counter() - wall0
    return graph, report


def build_threshold_spanner(
    dataset: Dataset, measure: Measure, family: HashFamily, cfg: ThresholdConfig, threads: int | None = None
) -> tuple[SimilarityGraph, BuildReport]:
    """Stars graph: every edge has similarity >= ``cfg.r1``; close pairs end up within two hops.

    Inside each (sub-)bucket ``cfg.leaders`` leaders are sampled; every leader
    is compared to every other member, leader pairs once.
    """
    return _build(dataset, measure, family, cfg, exhaustive=False, threads=threads)


def build_allpairs_lsh(
    dataset: Dataset, measure: Measure, family: HashFamily, cfg: ThresholdConfig, threads: int | None = None
) -> tuple[SimilarityGraph, BuildReport]:
    """Baseline with the same bucketing, comparing every pair inside each (sub-)bucket."""
    return _build(dataset, measure, family, cfg, exhaustive=True, threads=threads)
