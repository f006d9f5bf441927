"""Forests, union-find, Kruskal's maximum spanning tree and held-out pruning."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError


class DisjointSet:
    """Union-find over ``0..d-1`` with path compression and union by rank."""

    def __init__(self, d: int):
        self.parent = list(range(d))
        self.rank = [0] * d
        self.components = d

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> bool:
        """Merge the sets of ``x`` and ``y``; False if they were already joined."""
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1
        self.components -= 1
        return True


def _edge(i: int, j: int) -> tuple[int, int]:
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Forest:
    """An acyclic undirected graph on vertices ``0..d-1``.

    Edges are stored as ``(i, j)`` with ``i < j``.  Instances are immutable;
    construction checks for self-loops, out-of-range vertices and cycles.
    """

    d: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        ds = DisjointSet(self.d)
        for i, j in self.edges:
            if i == j:
                raise ContractError(f"self-loop at vertex {i}")
            if not (0 <= i < self.d and 0 <= j < self.d):
                raise ContractError(f"edge ({i}, {j}) out of range for d={self.d}")
            e = _edge(i, j)
            if e in norm:
                continue
            if not ds.union(*e):
                raise ContractError(f"edge {e} closes a cycle")
            norm.add(e)
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, d: int, edges: Iterable[tuple[int, int]]) -> "Forest":
        return cls(d, frozenset(_edge(i, j) for i, j in edges))

    @classmethod
    def empty(cls, d: int) -> "Forest":
        return cls(d, frozenset())

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.d, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        deg.flags.writeable = False
        return deg

    def degree(self, v: int) -> int:
        return degree(self, v)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.d, self.d), dtype=int)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1
        return a

    def is_spanning_tree(self) -> bool:
        return len(self.edges) == self.d - 1

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def total_weight(self, w) -> float:
        w = np.asarray(getattr(w, "w", w))
        return float(sum(w[i, j] for i, j in self.sorted_edges()))

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.d)]
        for i, j in self.sorted_edges():
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def __len__(self) -> int:
        return len(self.edges)


def degree(f: Forest, v: int) -> int:
    """Number of edges of ``f`` incident to vertex ``v``."""
    if not 0 <= v < f.d:
        raise ContractError(f"vertex {v} out of range for d={f.d}")
    return int(f.degrees[v])


@dataclass(frozen=True)
class EdgeTrace:
    """Edges in the order Kruskal inserted them, with the weight used to rank each."""

    d: int
    steps: tuple  # of (i, j, weight)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j, _ in self.steps]

    def prefix(self, k: int) -> Forest:
        return Forest.from_edges(self.d, self.edges[:k])


def _as_matrix(w) -> np.ndarray:
    return np.asarray(getattr(w, "w", w), dtype=float)


def kruskal(w) -> tuple[Forest, EdgeTrace]:
    """Maximum-weight spanning tree of a symmetric weight matrix.

    Candidate edges are ranked by weight (descending) and then by the
    vertex pair (ascending), so ties are resolved the same way on every
    platform.  Exactly ``d - 1`` edges are added whatever their sign.
    """
    w = _as_matrix(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ContractError(f"weight matrix must be square, got shape {w.shape}")
    d = w.shape[0]
    if d < 2:
        raise ContractError("need at least 2 vertices")
    if not np.all(np.isfinite(w)):
        raise ContractError("weight matrix has non-finite entries")
    if not np.array_equal(w, w.T):
        raise ContractError("weight matrix is not symmetric")
    iu, ju = np.triu_indices(d, 1)
    vals = w[iu, ju]
    order = np.lexsort((ju, iu, -vals))
    ds = DisjointSet(d)
    steps = []
    for k in order:
        i, j = int(iu[k]), int(ju[k])
        if ds.union(i, j):
            steps.append((i, j, float(vals[k])))
            if len(steps) == d - 1:
                break
    trace = EdgeTrace(d, tuple(steps))
    return Forest.from_edges(d, trace.edges), trace


def best_prefix(terms: Sequence[float]) -> tuple[int, float]:
    """Smallest ``k`` maximizing the cumulative sum of the first ``k`` terms, and that maximum."""
    best_k, best, acc = 0, 0.0, 0.0
    for k, t in enumerate(terms, start=1):
        acc += float(t)
        if acc > best:
            best_k, best = k, acc
    return best_k, best


def trace_terms(trace: EdgeTrace, holdout) -> list[float]:
    """Look up per-edge held-out terms for a trace from a d x d term matrix."""
    holdout = np.asarray(holdout, dtype=float)
    if holdout.shape != (trace.d, trace.d):
        raise ContractError(f"held-out term matrix has shape {holdout.shape}, expected {(trace.d, trace.d)}")
    return [float(holdout[i, j]) for i, j in trace.edges]


def prune_by_holdout(trace: EdgeTrace, holdout_terms) -> Forest:
    """Keep the trace prefix with the largest summed held-out term.

    ``holdout_terms`` is either a sequence aligned with the trace or a
    d x d matrix of pairwise terms.
    """
    arr = np.asarray(holdout_terms, dtype=float)
    terms = trace_terms(trace, arr) if arr.ndim == 2 else list(arr)
    if len(terms) != len(trace):
        raise ContractError(f"{len(terms)} held-out terms for a trace of {len(trace)} edges")
    k, _ = best_prefix(terms)
    return trace.prefix(k)
