import numpy as np
import pytest

from stars.core import Dataset

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit_dataset(n, dim, seed=0):
    x = np.random.default_rng(seed).standard_normal((n, dim))
    return Dataset(vectors=x)


def random_sets(n, universe=30, max_size=8, seed=0, weighted=False):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        size = int(rng.integers(1, max_size + 1))
        toks = rng.choice(universe, size=size, replace=False)
        if weighted:
            out.append({f"t{t}": float(rng.integers(1, 4)) for t in toks})
        else:
            out.append({f"t{t}": 1.0 for t in toks})
    return Dataset(sets=out)


def bfs_within(adj_lists, p, hops):
    seen = {p}
    frontier = {p}
    for _ in range(hops):
        nxt = set()
        for u in frontier:
            nxt.update(adj_lists[u])
        frontier = nxt - seen
        seen |= nxt
    seen.discard(p)
    return seen


def adjacency_lists(graph):
    adj = [set() for _ in range(graph.n)]
    for a, b in zip(graph.a.tolist(), graph.b.tolist()):
        adj[a].add(b)
        adj[b].add(a)
    return adj
