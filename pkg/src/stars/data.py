"""Dataset file formats and the synthetic Gaussian-mixture generator.

Formats (ids follow line order):

* dense text: header ``n d``, then ``n`` lines of ``d`` space-separated reals.
  Values are written with ``repr`` so a write/load round trip is bit-exact.
* dense binary: the same header as one text line, then ``n*d`` little-endian
  float32 values.
* weighted sets: one point per line, tab-separated ``token:weight`` entries;
  an empty line is an empty set.
* labels: ``<point_id>\\t<label>`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, DatasetError
from .lsh import MASK64


class ParseError(DatasetError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class MixtureSpec:
    n: int
    dim: int = 100
    modes: int = 100
    sigma: float = 0.1
    seed: int = 0


def gen_gaussian_mixture(spec: MixtureSpec) -> Dataset:
    """Points ``e_i + N(0, sigma^2 I)`` with mode ``i`` uniform; the mode is the label.

    Point ``j`` draws from its own stream seeded by ``(seed, j)``.
    """
    if spec.n < 1:
        raise DatasetError("n must be >= 1")
    if spec.modes < 1 or spec.modes > spec.dim:
        raise DatasetError(f"need 1 <= modes <= dim, got modes={spec.modes}, dim={spec.dim}")
    if spec.sigma < 0:
        raise DatasetError("sigma must be non-negative")
    x = np.empty((spec.n, spec.dim))
    labels = np.empty(spec.n, dtype=np.int64)
    seed = spec.seed & MASK64
    for j in range(spec.n):
        rng = np.random.default_rng([seed, j])
        mode = int(rng.integers(spec.modes))
        x[j] = rng.normal(0.0, spec.sigma, spec.dim)
        x[j, mode] += 1.0
        labels[j] = mode
    return Dataset(vectors=x, labels=labels)


def gen_planted_clumps(
    k: int, per_clump: int, dim: int | None = None, noise: float = 0.02, seed: int = 0
) -> Dataset:
    """``k`` tight clumps around orthogonal basis directions, labelled by clump.

    With small ``noise`` the cosine similarity is close to 1 inside a clump
    and close to 0 across clumps.
    """
    dim = dim or k
    if k > dim:
        raise DatasetError("need k <= dim")
    rng = np.random.default_rng([seed & MASK64, k, per_clump])
    labels = np.repeat(np.arange(k), per_clump)
    x = rng.normal(0.0, noise, (k * per_clump, dim))
    x[np.arange(len(labels)), labels] += 1.0
    return Dataset(vectors=x, labels=labels)


def write_dense(data: Dataset, path, binary: bool = False) -> None:
    if data.vectors is None:
        raise DatasetError("dataset has no dense vectors")
    n, d = data.vectors.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"{n} {d}\n".encode())
            fh.write(np.ascontiguousarray(data.vectors, dtype="<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for row in data.vectors.tolist():
            fh.write(" ".join(repr(v) for v in row))
            fh.write("\n")


def load_dense(path, binary: bool | None = None) -> Dataset:
    path = Path(path)
    raw = path.read_bytes()
    if not raw.strip():
        raise ParseError(path, 1, "empty file")
    header, _, body = raw.partition(b"\n")
    try:
        n, d = (int(t) for t in header.split())
    except ValueError:
        raise ParseError(path, 1, "header must be 'n d'") from None
    if n < 1 or d < 1:
        raise ParseError(path, 1, "n and d must be positive")
    if binary is None:
        binary = len(body) == 4 * n * d and not _looks_textual(body)
    if binary:
        if len(body) != 4 * n * d:
            raise ParseError(path, 2, f"expected {4 * n * d} bytes of float32 data, got {len(body)}")
        return Dataset(vectors=np.frombuffer(body, dtype="<f4").reshape(n, d).astype(np.float64))
    rows = []
    for lineno, line in enumerate(body.decode("utf-8").splitlines(), 2):
        if not line.strip():
            continue
        try:
            row = [float(t) for t in line.split()]
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        if len(row) != d:
            raise ParseError(path, lineno, f"expected {d} values, got {len(row)}")
        rows.append(row)
    if len(rows) != n:
        raise ParseError(path, 1, f"header promises {n} points, file has {len(rows)}")
    return Dataset(vectors=np.array(rows))


def _looks_textual(body: bytes) -> bool:
    sample = body[:4096]
    try:
        text = sample.decode("ascii")
    except UnicodeDecodeError:
        return False
    return all(c.isdigit() or c in " \n\r\t.eE+-infaINFA" for c in text)


def write_weighted_sets(data: Dataset, path) -> None:
    if data.sets is None:
        raise DatasetError("dataset has no weighted sets")
    with open(path, "w", encoding="utf-8") as fh:
        for s in data.sets:
            fh.write("\t".join(f"{t}:{w!r}" for t, w in s.items()))
            fh.write("\n")


def load_weighted_sets(path) -> Dataset:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text:
        raise ParseError(path, 1, "empty file")
    lines = text.split("\n")
    if text.endswith("\n"):
        lines.pop()
    sets = []
    for lineno, line in enumerate(lines, 1):
        s = {}
        for entry in line.split("\t") if line else []:
            token, sep, weight = entry.rpartition(":")
            if not sep or not token:
                raise ParseError(path, lineno, f"expected token:weight, got {entry!r}")
            try:
                w = float(weight)
            except ValueError:
                raise ParseError(path, lineno, f"bad weight {weight!r}") from None
            if not w > 0:
                raise ParseError(path, lineno, f"weight of {token!r} must be positive")
            s[token] = w
        sets.append(s)
    return Dataset(sets=sets)


def write_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, lab in enumerate(np.asarray(labels).tolist()):
            fh.write(f"{i}\t{lab}\n")


def load_labels(path, n: int | None = None) -> np.ndarray:
    """Labels by point id; every id in ``[0, n)`` must appear exactly once."""
    path = Path(path)
    found: dict[int, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(path, lineno, "expected '<point_id>\\t<label>'")
        try:
            pid = int(parts[0])
        except ValueError:
            raise ParseError(path, lineno, f"bad point id {parts[0]!r}") from None
        if pid in found:
            raise ParseError(path, lineno, f"duplicate point id {pid}")
        found[pid] = parts[1].strip()
    if not found:
        raise ParseError(path, 1, "empty file")
    n = n if n is not None else max(found) + 1
    missing = [i for i in range(n) if i not in found]
    if missing or max(found) >= n:
        raise DatasetError(f"{path}: labels must cover ids 0..{n - 1} exactly")
    values = [found[i] for i in range(n)]
    try:
        return np.array([int(v) for v in values])
    except ValueError:
        return np.array(values)
