"""Similarity measures and a comparison-counting wrapper.

Every measure works in two modes: on raw payloads (``measure(x, y)``) and in
batch over id pairs of a :class:`~stars.core.Dataset` (``measure.pairs``).
The batch kernel computes each pair independently of the batch it sits in, so
the same pair always gets a bit-identical weight.
"""

from __future__ import annotations

import math
import threading
from typing import Mapping, Sequence

import numpy as np

from .core import Dataset, DatasetError


class ZeroVectorError(ValueError):
    """The angle to a zero vector is undefined."""


def _as_vectors(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def dot_product(x, y) -> float:
    x, y = _as_vectors(x, y)
    return float(np.sum(x * y))


def cosine_similarity(x, y) -> float:
    x, y = _as_vectors(x, y)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroVectorError("cosine similarity with a zero vector is undefined")
    return float(np.clip(np.sum((x / nx) * (y / ny)), -1.0, 1.0))


def angular_similarity(x, y) -> float:
    """``1 - theta/pi`` where ``theta`` is the angle between ``x`` and ``y``."""
    x, y = _as_vectors(x, y)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroVectorError("the angle to a zero vector is undefined")
    return float(_unit_angular(x / nx, y / ny))


def _unit_angular(u, v):
    # 2*atan2(|u-v|, |u+v|) stays accurate near 0 and pi, where arccos of a dot product does not
    d = u - v
    s = u + v
    theta = 2.0 * np.arctan2(np.sqrt(np.sum(d * d, axis=-1)), np.sqrt(np.sum(s * s, axis=-1)))
    return 1.0 - theta / math.pi


def _cos_to_angular(c):
    return 1.0 - np.arccos(np.clip(c, -1.0, 1.0)) / math.pi


def jaccard(a: Mapping | set, b: Mapping | set) -> float:
    """Intersection over union of the token supports; weights are ignored."""
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def weighted_jaccard(x: Mapping[str, float], y: Mapping[str, float]) -> float:
    """``sum(min) / sum(max)`` over the union of supports (missing tokens weigh 0)."""
    num = 0.0
    den = 0.0
    for t in sorted(x.keys() | y.keys()):
        wx = x.get(t, 0.0)
        wy = y.get(t, 0.0)
        if wx < 0 or wy < 0:
            raise ValueError("weighted Jaccard needs non-negative weights")
        num += min(wx, wy)
        den += max(wx, wy)
    if den == 0:
        return 1.0
    return num / den


def mixture_similarity(p, q, w: float = 0.5) -> float:
    """``w * angular + (1 - w) * jaccard`` on paired ``(vector, set)`` points."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("mixture weight must lie in [0, 1]")
    try:
        (xv, xs), (yv, ys) = p, q
    except (TypeError, ValueError):
        raise ValueError("mixture similarity needs paired (vector, set) points") from None
    if xv is None or yv is None or xs is None or ys is None:
        raise ValueError("mixture similarity needs both payloads on both points")
    return w * angular_similarity(xv, yv) + (1.0 - w) * jaccard(xs, ys)


class Measure:
    """Base class. Subclasses set ``name`` and ``payloads`` and implement
    ``__call__`` (raw payloads) and ``_pairs`` (dataset batch)."""

    name: str = ""
    payloads: tuple[str, ...] = ()
    lower: float = 0.0
    upper: float = 1.0

    def __call__(self, x, y) -> float:
        raise NotImplementedError

    def _pairs(self, data: Dataset, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check(self, data: Dataset) -> None:
        """Raise :class:`DatasetError` if ``data`` lacks a payload this measure needs."""
        if "vectors" in self.payloads and data.vectors is None:
            raise DatasetError(f"measure {self.name!r} needs dense vectors")
        if "sets" in self.payloads and data.sets is None:
            raise DatasetError(f"measure {self.name!r} needs weighted sets")
        if self.name in ("cosine", "angular", "mixture"):
            data.unit_vectors  # raises on zero vectors

    def pairs(self, data: Dataset, a, b) -> np.ndarray:
        """Similarities of the id pairs ``(a[i], b[i])``."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if len(a) == 0:
            return np.empty(0, dtype=np.float64)
        # canonical orientation keeps weights bit-identical whatever the call order
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return self._pairs(data, lo, hi)

    def point(self, data: Dataset, i: int):
        """Payload of point ``i`` in the form ``__call__`` expects."""
        if self.payloads == ("vectors",):
            return data.vectors[i]
        if self.payloads == ("sets",):
            return data.sets[i]
        return (data.vectors[i], data.sets[i])

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class DotProduct(Measure):
    name = "dot"
    payloads = ("vectors",)
    lower = -math.inf
    upper = math.inf

    def __call__(self, x, y):
        return dot_product(x, y)

    def _pairs(self, data, a, b):
        return np.sum(data.vectors[a] * data.vectors[b], axis=1)


class Cosine(Measure):
    name = "cosine"
    payloads = ("vectors",)
    lower = -1.0

    def __call__(self, x, y):
        return cosine_similarity(x, y)

    def _pairs(self, data, a, b):
        u = data.unit_vectors
        return np.clip(np.sum(u[a] * u[b], axis=1), -1.0, 1.0)


class Angular(Measure):
    name = "angular"
    payloads = ("vectors",)

    def __call__(self, x, y):
        return angular_similarity(x, y)

    def _pairs(self, data, a, b):
        u = data.unit_vectors
        return _unit_angular(u[a], u[b])


class Jaccard(Measure):
    name = "jaccard"
    payloads = ("sets",)

    def __call__(self, x, y):
        return jaccard(x, y)

    def _pairs(self, data, a, b):
        ts = data.token_sets
        return np.fromiter((jaccard(ts[i], ts[j]) for i, j in zip(a.tolist(), b.tolist())), np.float64, len(a))


class WeightedJaccard(Measure):
    name = "wjaccard"
    payloads = ("sets",)

    def __call__(self, x, y):
        return weighted_jaccard(x, y)

    def _pairs(self, data, a, b):
        s = data.sets
        return np.fromiter((weighted_jaccard(s[i], s[j]) for i, j in zip(a.tolist(), b.tolist())), np.float64, len(a))


class Mixture(Measure):
    name = "mixture"
    payloads = ("vectors", "sets")

    def __init__(self, weight_cosine: float = 0.5):
        if not 0.0 <= weight_cosine <= 1.0:
            raise ValueError("mixture weight must lie in [0, 1]")
        self.weight_cosine = float(weight_cosine)

    def __call__(self, x, y):
        return mixture_similarity(x, y, self.weight_cosine)

    def _pairs(self, data, a, b):
        w = self.weight_cosine
        return w * Angular()._pairs(data, a, b) + (1.0 - w) * Jaccard()._pairs(data, a, b)

    def __repr__(self):
        return f"Mixture(weight_cosine={self.weight_cosine})"


MEASURES = {cls.name: cls for cls in (DotProduct, Cosine, Angular, Jaccard, WeightedJaccard, Mixture)}


def get_measure(name: str, mixture_weight: float = 0.5) -> Measure:
    if name not in MEASURES:
        raise ValueError(f"unknown measure {name!r}; choose from {sorted(MEASURES)}")
    if name == "mixture":
        return Mixture(mixture_weight)
    return MEASURES[name]()


class ComparisonCounter:
    """Thread-safe monotone tally of similarity evaluations."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def add(self, k: int = 1) -> None:
        if k < 0:
            raise ValueError("counter is monotone")
        with self._lock:
            self._count += k

    @property
    def count(self) -> int:
        return self._count

    def __repr__(self):
        return f"ComparisonCounter({self._count})"


class CountedMeasure(Measure):
    """Wraps a measure; every similarity evaluation bumps ``counter`` by one."""

    def __init__(self, inner: Measure, counter: ComparisonCounter | None = None):
        self.inner = inner
        self.counter = counter if counter is not None else ComparisonCounter()
        self.name = inner.name
        self.payloads = inner.payloads
        self.lower = inner.lower
        self.upper = inner.upper

    def __call__(self, x, y):
        self.counter.add(1)
        return self.inner(x, y)

    def pairs(self, data, a, b):
        out = self.inner.pairs(data, a, b)
        self.counter.add(len(out))
        return out

    def _pairs(self, data, a, b):
        return self.inner._pairs(data, a, b)

    def check(self, data):
        self.inner.check(data)

    def point(self, data, i):
        return self.inner.point(data, i)

    def __repr__(self):
        return f"CountedMeasure({self.inner!r}, count={self.counter.count})"


def counted(measure: Measure, counter: ComparisonCounter | None = None) -> CountedMeasure:
    return CountedMeasure(measure, counter)


def unwrap(measure: Measure) -> Measure:
    while isinstance(measure, CountedMeasure):
        measure = measure.inner
    return measure


def allpairs_count(n: int) -> int:
    return n * (n - 1) // 2


def pairwise_rows(measure: Measure, data: Dataset, rows: Sequence[int]) -> np.ndarray:
    """Dense ``len(rows) x n`` block of similarities (diagonal entries included).

    Uses matrix products for vector measures. Values can differ from
    :meth:`Measure.pairs` slightly: in the last ulp for dot and cosine, and by
    up to about ``1e-7`` for angular similarity near 0 or 1, where the arccos
    of a rounded dot product loses precision.
    """
    inner = unwrap(measure)
    rows = np.asarray(rows, dtype=np.int64)
    if isinstance(inner, (Angular, Cosine, DotProduct, Mixture)):
        if isinstance(inner, DotProduct):
            block = data.vectors[rows] @ data.vectors.T
        else:
            u = data.unit_vectors
            block = np.clip(u[rows] @ u.T, -1.0, 1.0)
            if isinstance(inner, (Angular, Mixture)):
                block = _cos_to_angular(block)
        if isinstance(inner, Mixture):
            w = inner.weight_cosine
            block = w * block + (1.0 - w) * _jaccard_rows(data, rows)
        return block
    out = np.empty((len(rows), data.n), dtype=np.float64)
    cols = np.arange(data.n)
    for r, i in enumerate(rows.tolist()):
        out[r] = inner.pairs(data, np.full(data.n, i), cols)
    return out


def _jaccard_rows(data: Dataset, rows: np.ndarray) -> np.ndarray:
    ts = data.token_sets
    out = np.empty((len(rows), data.n), dtype=np.float64)
    for r, i in enumerate(rows.tolist()):
        out[r] = [jaccard(ts[i], ts[j]) for j in range(data.n)]
    return out
