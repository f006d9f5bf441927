"""Synthetic tree-structured graphs and copula data for simulation studies."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, stdtr

from .density import Dataset
from .errors import ConfigurationError
from .forest import Forest

GRAPH_KINDS = ("scale_free", "stars")
COPULA_FAMILIES = ("gaussian", "student_t")


@dataclass(frozen=True)
class GraphGenSpec:
    kind: str = "scale_free"
    d: int = 100
    alpha_pa: float = 1.5
    seed_chain_len: int = 4
    num_stars: int = 5
    star_size: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise ConfigurationError(f"graph kind must be one of {GRAPH_KINDS}, got {self.kind!r}")
        if self.d < 2:
            raise ConfigurationError(f"d must be >= 2, got {self.d}")
        if self.kind == "stars":
            if self.num_stars < 1 or self.star_size < 2:
                raise ConfigurationError("need num_stars >= 1 and star_size >= 2")
            if self.num_stars * self.star_size != self.d:
                raise ConfigurationError(
                    f"num_stars * star_size = {self.num_stars * self.star_size} but d = {self.d}"
                )
        else:
            if self.seed_chain_len < 2:
                raise ConfigurationError(f"seed_chain_len must be >= 2, got {self.seed_chain_len}")
            if self.seed_chain_len > self.d:
                raise ConfigurationError(f"seed_chain_len {self.seed_chain_len} exceeds d = {self.d}")


@dataclass(frozen=True)
class CopulaSpec:
    family: str = "gaussian"
    rho: float = 0.4
    nu: float = 1.0
    n: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if self.family not in COPULA_FAMILIES:
            raise ConfigurationError(f"copula family must be one of {COPULA_FAMILIES}, got {self.family!r}")
        if not abs(self.rho) < 1:
            raise ConfigurationError(f"|rho| must be < 1, got {self.rho}")
        if not self.nu >= 1:
            raise ConfigurationError(f"nu must be >= 1, got {self.nu}")
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")


@dataclass(frozen=True)
class MultiGraphSpec:
    """K units grown from a shared core (scale-free) or sharing whole stars."""

    K: int = 3
    base: GraphGenSpec = GraphGenSpec()
    shared_size: int = 80
    shared_stars: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if self.base.kind == "scale_free":
            if not self.base.seed_chain_len <= self.shared_size <= self.base.d:
                raise ConfigurationError(
                    f"shared_size must lie in [{self.base.seed_chain_len}, {self.base.d}], got {self.shared_size}"
                )
        else:
            if not 0 <= self.shared_stars <= self.base.num_stars:
                raise ConfigurationError(
                    f"shared_stars must lie in [0, {self.base.num_stars}], got {self.shared_stars}"
                )
            if self.shared_stars < self.base.num_stars and self.K > self.base.star_size:
                raise ConfigurationError("need K <= star_size so unit-specific stars get distinct roots")


def _grow(edges: list, deg: list, target: int, alpha: float, rng: np.random.Generator) -> None:
    # p_i proportional to deg_i ** alpha over the current vertices
    while len(deg) < target:
        weights = np.asarray(deg, dtype=float) ** alpha
        parent = int(rng.choice(len(deg), p=weights / weights.sum()))
        child = len(deg)
        edges.append((parent, child))
        deg[parent] += 1
        deg.append(1)


def _seed_chain(length: int):
    edges = [(v, v + 1) for v in range(length - 1)]
    deg = [1] + [2] * (length - 2) + [1] if length > 2 else [1, 1]
    return edges, deg


def gen_scale_free(spec: GraphGenSpec) -> Forest:
    """Preferential-attachment tree grown from a seed chain.

    Each new vertex attaches to one existing vertex chosen with probability
    proportional to its current degree raised to ``alpha_pa``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    edges, deg = _seed_chain(spec.seed_chain_len)
    _grow(edges, deg, spec.d, spec.alpha_pa, rng)
    return Forest.from_edges(spec.d, edges)


def _star(block: int, size: int, root_offset: int = 0):
    start = block * size
    root = start + root_offset
    return [(root, v) for v in range(start, start + size) if v != root]


def gen_stars(spec: GraphGenSpec) -> Forest:
    """``num_stars`` disjoint stars over consecutive blocks, rooted at each block's first vertex."""
    if spec.kind != "stars":
        raise ConfigurationError("gen_stars needs a stars spec")
    edges = []
    for b in range(spec.num_stars):
        edges += _star(b, spec.star_size)
    return Forest.from_edges(spec.d, edges)


def gen_graph(spec: GraphGenSpec) -> Forest:
    return gen_stars(spec) if spec.kind == "stars" else gen_scale_free(spec)


def gen_multi(spec: MultiGraphSpec) -> list[Forest]:
    """K forests with common structure.

    Scale-free: one preferential-attachment core on ``shared_size`` vertices
    is grown once, then each unit continues attachment independently up to
    ``d`` vertices.  Stars: the first ``shared_stars`` stars are common and
    each remaining block is a star whose root differs across units.
    """
    base = spec.base
    if base.kind == "stars":
        units = []
        for k in range(spec.K):
            edges = []
            for b in range(base.num_stars):
                edges += _star(b, base.star_size, 0 if b < spec.shared_stars else k)
            units.append(Forest.from_edges(base.d, edges))
        return units

    seeds = np.random.SeedSequence(spec.rng_seed).spawn(spec.K + 1)
    core_edges, core_deg = _seed_chain(base.seed_chain_len)
    _grow(core_edges, core_deg, spec.shared_size, base.alpha_pa, np.random.default_rng(seeds[0]))
    units = []
    for k in range(spec.K):
        edges, deg = list(core_edges), list(core_deg)
        _grow(edges, deg, base.d, base.alpha_pa, np.random.default_rng(seeds[k + 1]))
        units.append(Forest.from_edges(base.d, edges))
    return units


def _traversal(tree: Forest) -> list[tuple[int, int | None]]:
    """(vertex, parent) pairs in BFS order, each component rooted at its lowest vertex."""
    adj = tree.neighbors()
    seen = [False] * tree.d
    order = []
    for root in range(tree.d):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        order.append((root, None))
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    order.append((u, v))
                    queue.append(u)
    return order


def sample_tree_latent(tree: Forest, spec: CopulaSpec) -> np.ndarray:
    """Latent Gaussian or Student-t draws (n x d) that are Markov to ``tree``.

    Roots are standard normal / standard t_nu.  Given its parent value
    ``p`` a child is ``Normal(rho p, 1 - rho^2)`` in the Gaussian family, and
    in the t family it is location ``rho p`` with squared scale
    ``(nu + p^2)(1 - rho^2)/(nu + 1)`` and ``nu + 1`` degrees of freedom,
    which is the conditional of a bivariate t with correlation ``rho``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    n, rho, nu = spec.n, spec.rho, spec.nu
    z = np.empty((n, tree.d))
    for v, parent in _traversal(tree):
        if spec.family == "gaussian":
            if parent is None:
                z[:, v] = rng.standard_normal(n)
            else:
                z[:, v] = rho * z[:, parent] + np.sqrt(1 - rho**2) * rng.standard_normal(n)
        else:
            if parent is None:
                z[:, v] = rng.standard_t(nu, n)
            else:
                p = z[:, parent]
                scale = np.sqrt((nu + p * p) * (1 - rho**2) / (nu + 1))
                z[:, v] = rho * p + scale * rng.standard_t(nu + 1, n)
    return z


def sample_tree_copula(tree: Forest, spec: CopulaSpec, column_names=None) -> Dataset:
    """Draw ``spec.n`` rows on the uniform copula scale, Markov to ``tree``."""
    z = sample_tree_latent(tree, spec)
    u = ndtr(z) if spec.family == "gaussian" else stdtr(spec.nu, z)
    return Dataset(u, column_names or [f"X{k + 1}" for k in range(tree.d)])
