import itertools

import numpy as np
import pytest
from scipy.special import ndtr


def prufer_decode(seq, d):
    """Edge list of the labeled tree encoded by a Prufer sequence."""
    degree = [1] * d
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = min(u for u in range(d) if degree[u] == 1)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = [x for x in range(d) if degree[x] == 1]
    edges.append((u, w))
    return edges


def all_spanning_trees(d):
    if d == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(d), repeat=d - 2):
        yield prufer_decode(seq, d)


def brute_force_max_tree(w):
    d = w.shape[0]
    return max(sum(w[i, j] for i, j in t) for t in all_spanning_trees(d))


def random_symmetric(rng, d, low=-1.0, high=1.0):
    a = rng.uniform(low, high, size=(d, d))
    w = np.triu(a, 1)
    return w + w.T


def gaussian_copula_pair(rng, n, rho):
    z1 = rng.standard_normal(n)
    z2 = rho * z1 + np.sqrt(1 - rho**2) * rng.standard_normal(n)
    return ndtr(z1), ndtr(z2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record the verdict line for one acceptance criterion."""

    def record(number, ok, detail):
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
