"""Seeded LSH families: SimHash, MinHash, weighted MinHash and their mixture.

Hash function ``i`` of a family is a pure function of ``(master_seed, i)``,
where ``i`` is an integer or a ``(repetition, position)`` pair. Nothing is
tabulated over the token universe: MinHash scores come from mixing a 64-bit
token digest with a per-index salt.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Dataset, DatasetError
from .similarity import Measure, unwrap

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_SIMHASH_TAG = 0x51A7
_MINHASH_TAG = 0x3141_5926_5358_9793
_COIN_TAG = 0x2718_2818_2845_9045
_REPLICA_TAG = 0x1618_0339_8874_9894


class EmptySetError(ValueError):
    """MinHash of an empty set is undefined."""


def mix64(x: int) -> int:
    """splitmix64 step on a Python int."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """splitmix64 step applied elementwise to a uint64 array."""
    z = np.asarray(x, dtype=np.uint64) + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def token_digest(token) -> int:
    """Stable 64-bit digest of a token (independent of ``PYTHONHASHSEED``)."""
    return int.from_bytes(hashlib.blake2b(str(token).encode("utf-8"), digest_size=8).digest(), "little")


def _index_tuple(index) -> tuple[int, ...]:
    if isinstance(index, (int, np.integer)):
        return (int(index),)
    return tuple(int(i) for i in index)


def index_salt(master_seed: int, index, tag: int = _MINHASH_TAG) -> int:
    s = mix64((master_seed & MASK64) ^ tag)
    for c in _index_tuple(index):
        s = mix64(s ^ (c & MASK64))
    return s


def _salts(master_seed: int, repetition: int, length: int) -> np.ndarray:
    return np.array([index_salt(master_seed, (repetition, pos)) for pos in range(length)], dtype=np.uint64)


def simhash_direction(master_seed: int, index, dim: int) -> np.ndarray:
    """Pseudo-random Gaussian direction for hash ``index``; its sign pattern is sphere-uniform."""
    rng = np.random.default_rng([master_seed & MASK64, *(_index_tuple(index)), _SIMHASH_TAG])
    return rng.standard_normal(dim)


def simhash_eval(seed_pair: tuple, x) -> int:
    """Sign bit (1 for positive) of ``<x, z>`` for the seeded direction ``z``."""
    master_seed, index = seed_pair
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        raise ValueError("SimHash of a zero vector is undefined")
    z = simhash_direction(master_seed, index, x.shape[0])
    return int(np.dot(x, z) > 0)


def _set_digests(tokens) -> np.ndarray:
    return np.array(sorted({token_digest(t) for t in tokens}), dtype=np.uint64)


def _minhash_digests(digests: np.ndarray, salts: np.ndarray) -> np.ndarray:
    """For every salt, the digest whose mixed score is smallest."""
    if len(digests) == 0:
        raise EmptySetError("MinHash of an empty set is undefined")
    scores = mix64_array(digests[None, :] ^ salts[:, None])
    return digests[np.argmin(scores, axis=1)]


def minhash_score(master_seed: int, index, token) -> float:
    """The seeded score ``n_u`` in ``[0, 1)`` of ``token`` under hash ``index``."""
    s = int(mix64_array(np.array([token_digest(token) ^ index_salt(master_seed, index)], dtype=np.uint64))[0])
    return s / 2.0**64


def minhash_eval(seed_pair: tuple, tokens) -> int:
    """Digest of the token of minimal seeded score (weights, if any, are ignored)."""
    master_seed, index = seed_pair
    digests = _set_digests(tokens)
    salt = np.array([index_salt(master_seed, index)], dtype=np.uint64)
    return int(_minhash_digests(digests, salt)[0])


def minhash_from_digests(seed_pair: tuple, digests) -> int:
    """MinHash over an explicit collection of 64-bit token digests."""
    master_seed, index = seed_pair
    d = np.unique(np.asarray(list(digests), dtype=np.uint64))
    salt = np.array([index_salt(master_seed, index)], dtype=np.uint64)
    return int(_minhash_digests(d, salt)[0])


def replica_count(weight: float, granularity: float) -> int:
    """Number of virtual copies ``ceil(weight / granularity)`` a token expands into."""
    if weight < 0:
        raise ValueError("weights must be non-negative")
    if weight == 0:
        return 0
    # guard against 1.1 / 0.1 == 11.000000000000002
    return max(1, math.ceil(weight / granularity - 1e-9))


def replica_digests(base: int | np.ndarray, count: int | np.ndarray) -> np.ndarray:
    """Digests of replicas ``1..count`` of each base digest; replica 1 is the token itself."""
    base = np.atleast_1d(np.asarray(base, dtype=np.uint64))
    count = np.broadcast_to(np.atleast_1d(np.asarray(count, dtype=np.int64)), base.shape)
    reps = np.repeat(base, count)
    starts = np.repeat(np.cumsum(count) - count, count)
    j = (np.arange(len(reps)) - starts + 1).astype(np.uint64)
    derived = mix64_array(reps ^ mix64_array(j ^ np.uint64(_REPLICA_TAG)))
    return np.where(j == 1, reps, derived)


def _weighted_digests(x: Mapping[str, float], granularity: float) -> np.ndarray:
    if granularity <= 0:
        raise ValueError("granularity must be positive")
    items = [(token_digest(t), replica_count(w, granularity)) for t, w in x.items()]
    items = [(d, c) for d, c in items if c > 0]
    if not items:
        raise EmptySetError("weighted MinHash of an empty support is undefined")
    base, cnt = zip(*items)
    return np.unique(replica_digests(np.array(base, dtype=np.uint64), np.array(cnt)))


def weighted_minhash_eval(seed_pair: tuple, x: Mapping[str, float], granularity: float = 1.0) -> int:
    """MinHash of ``x`` with each token duplicated ``ceil(w / granularity)`` times."""
    master_seed, index = seed_pair
    salt = np.array([index_salt(master_seed, index)], dtype=np.uint64)
    return int(_minhash_digests(_weighted_digests(x, granularity), salt)[0])


def coin(master_seed: int, index) -> bool:
    """Seeded fair coin; ``True`` selects SimHash for this index in a mixed family."""
    return bool(mix64(index_salt(master_seed, index) ^ _COIN_TAG) & 1)


def mixed_eval(seed_pair: tuple, p) -> int:
    """SimHash bit of the vector or MinHash digest of the set, chosen by a seeded coin."""
    try:
        vec, tokens = p
    except (TypeError, ValueError):
        raise ValueError("mixed hashing needs a paired (vector, set) point") from None
    if vec is None or tokens is None:
        raise ValueError("mixed hashing needs both payloads")
    master_seed, index = seed_pair
    if coin(master_seed, index):
        return simhash_eval(seed_pair, vec)
    return minhash_eval(seed_pair, tokens)


@dataclass(frozen=True)
class AnnFamilyParams:
    """Parameters of an approximate-neighbour family: target ``k``, exponent ``rho``
    and the longest sketch prefix ``max_len`` any point may use."""

    k: int
    rho: float
    max_len: int

    def __post_init__(self):
        if self.k < 1 or self.max_len < 1:
            raise ValueError("k and max_len must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")


class HashFamily:
    """A seeded generator of hash functions ``h_i``.

    Subclasses implement :meth:`eval` for one point and
    :meth:`sketch_dataset` for a whole dataset; both must agree.
    """

    kind: str = ""
    payloads: tuple[str, ...] = ()
    suited_measures: tuple[str, ...] = ()

    def __init__(self, master_seed: int = 0):
        self.master_seed = int(master_seed) & MASK64

    def eval(self, index, payload) -> int:
        raise NotImplementedError

    def sketch_dataset(self, data: Dataset, length: int, repetition: int) -> np.ndarray:
        raise NotImplementedError

    def check(self, data: Dataset) -> None:
        if "vectors" in self.payloads and data.vectors is None:
            raise DatasetError(f"{self.kind} hashing needs dense vectors")
        if "sets" in self.payloads and data.sets is None:
            raise DatasetError(f"{self.kind} hashing needs weighted sets")

    def warn_if_mismatched(self, measure: Measure) -> None:
        name = unwrap(measure).name
        if name not in self.suited_measures:
            warnings.warn(
                f"{self.kind} is not locality sensitive for measure {name!r}; recall guarantees do not apply",
                stacklevel=3,
            )

    def payload(self, data: Dataset, i: int):
        if self.payloads == ("vectors",):
            return data.vectors[i]
        if self.payloads == ("sets",):
            return data.sets[i]
        return (data.vectors[i], data.sets[i])

    def __repr__(self):
        return f"{type(self).__name__}(master_seed={self.master_seed})"


class SimHash(HashFamily):
    kind = "simhash"
    payloads = ("vectors",)
    suited_measures = ("angular", "cosine")

    def __init__(self, master_seed: int = 0, dim: int | None = None):
        super().__init__(master_seed)
        self.dim = dim

    def eval(self, index, payload):
        return simhash_eval((self.master_seed, index), payload)

    def directions(self, repetition: int, length: int, dim: int) -> np.ndarray:
        return np.stack([simhash_direction(self.master_seed, (repetition, pos), dim) for pos in range(length)])

    def sketch_dataset(self, data, length, repetition):
        self.check(data)
        if self.dim is not None and data.dim != self.dim:
            raise DatasetError(f"SimHash built for dim {self.dim}, data has dim {data.dim}")
        z = self.directions(repetition, length, data.dim)
        return (data.vectors @ z.T > 0).astype(np.uint64)


class MinHash(HashFamily):
    kind = "minhash"
    payloads = ("sets",)
    suited_measures = ("jaccard",)

    def eval(self, index, payload):
        return minhash_eval((self.master_seed, index), payload)

    def _point_digests(self, data: Dataset) -> list[np.ndarray]:
        cache = data.__dict__.setdefault("_minhash_digests", {})
        key = self.kind
        if key not in cache:
            cache[key] = [_set_digests(s) for s in data.sets]
        return cache[key]

    def sketch_dataset(self, data, length, repetition):
        self.check(data)
        salts = _salts(self.master_seed, repetition, length)
        out = np.empty((data.n, length), dtype=np.uint64)
        for i, d in enumerate(self._point_digests(data)):
            out[i] = _minhash_digests(d, salts)
        return out


class WeightedMinHash(MinHash):
    kind = "wminhash"
    suited_measures = ("wjaccard",)

    def __init__(self, master_seed: int = 0, granularity: float = 1.0):
        super().__init__(master_seed)
        if granularity <= 0:
            raise ValueError("granularity must be positive")
        self.granularity = float(granularity)

    def eval(self, index, payload):
        return weighted_minhash_eval((self.master_seed, index), payload, self.granularity)

    def _point_digests(self, data):
        cache = data.__dict__.setdefault("_minhash_digests", {})
        key = (self.kind, self.granularity)
        if key not in cache:
            cache[key] = [_weighted_digests(s, self.granularity) for s in data.sets]
        return cache[key]

    def __repr__(self):
        return f"WeightedMinHash(master_seed={self.master_seed}, granularity={self.granularity})"


class MixedHash(HashFamily):
    """Per index, a seeded coin picks SimHash on the vector or MinHash on the set."""

    kind = "mixed"
    payloads = ("vectors", "sets")
    suited_measures = ("mixture",)

    def eval(self, index, payload):
        return mixed_eval((self.master_seed, index), payload)

    def sketch_dataset(self, data, length, repetition):
        self.check(data)
        out = np.empty((data.n, length), dtype=np.uint64)
        sim = SimHash(self.master_seed)
        mh = MinHash(self.master_seed)
        use_sim = [coin(self.master_seed, (repetition, pos)) for pos in range(length)]
        sim_cols = [p for p, u in enumerate(use_sim) if u]
        mh_cols = [p for p, u in enumerate(use_sim) if not u]
        if sim_cols:
            z = np.stack([simhash_direction(self.master_seed, (repetition, p), data.dim) for p in sim_cols])
            out[:, sim_cols] = (data.vectors @ z.T > 0).astype(np.uint64)
        if mh_cols:
            salts = np.array([index_salt(self.master_seed, (repetition, p)) for p in mh_cols], dtype=np.uint64)
            for i, d in enumerate(mh._point_digests(data)):
                out[i, mh_cols] = _minhash_digests(d, salts)
        return out


FAMILIES = {"simhash": SimHash, "minhash": MinHash, "wminhash": WeightedMinHash, "mixed": MixedHash}


def get_family(kind: str, seed: int = 0, granularity: float = 1.0) -> HashFamily:
    if kind not in FAMILIES:
        raise ValueError(f"unknown LSH family {kind!r}; choose from {sorted(FAMILIES)}")
    if kind == "wminhash":
        return WeightedMinHash(seed, granularity)
    return FAMILIES[kind](seed)


def sketch(family: HashFamily, point, length: int, repetition: int = 0) -> tuple[int, ...]:
    """``(h_1(p), ..., h_length(p))`` for repetition ``repetition``."""
    if length < 1:
        raise ValueError("sketch length must be >= 1")
    return tuple(family.eval((repetition, pos), point) for pos in range(length))


def bucket_key(key: Sequence[int] | np.ndarray) -> int:
    """64-bit blake2b digest of a whole sketch; equal sketches give equal ids."""
    arr = np.ascontiguousarray(np.asarray(key, dtype=np.uint64).astype("<u8"))
    return int.from_bytes(hashlib.blake2b(arr.tobytes(), digest_size=8).digest(), "little")


def group_rows(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct sketch rows (in lexicographic byte order) and each input row's group index."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    view = keys.view(np.dtype((np.void, 8 * keys.shape[1]))).ravel()
    _, first, inverse = np.unique(view, return_index=True, return_inverse=True)
    return keys[first], inverse.ravel()


def bucket_keys(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group equal sketch rows.

    Returns ``(bucket_ids, inverse)``: one 64-bit id per distinct row and, for
    every input row, the index of its distinct row.
    """
    uniq, inverse = group_rows(keys)
    ids = np.array([bucket_key(row) for row in uniq], dtype=np.uint64)
    return ids, inverse
