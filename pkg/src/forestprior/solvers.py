"""Forest estimators: plain FDE and the two prior-penalized MM variants.

All three reduce to repeated maximum spanning tree searches.  The
penalized solvers alternate between linearizing the prior penalty at the
current tree(s), which turns it into per-edge weight adjustments, and
re-running Kruskal on the adjusted weights.  Each tree is finally pruned
on unpenalized held-out terms.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import digamma, gammaln

from .errors import ConfigurationError, ContractError
from .forest import EdgeTrace, Forest, kruskal, prune_by_holdout

CONVERGENCE_MODES = ("edge_set", "objective")

# multiples of the mean off-diagonal MI; below ~0.5 the penalty rarely changes a tree
DEFAULT_LAMBDA_MULTIPLIERS = (0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0)


@dataclass(frozen=True)
class PriorConfig:
    """Penalty scale ``lam``, Beta shapes and MM stopping controls."""

    lam: float = 0.0
    alpha: float = 1.0
    beta: float = 1.0
    max_iters: int = 50
    convergence: str = "edge_set"
    tol: float = 1e-8

    def __post_init__(self):
        if not self.lam >= 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigurationError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.convergence not in CONVERGENCE_MODES:
            raise ConfigurationError(f"convergence must be one of {CONVERGENCE_MODES}")

    def with_lambda(self, lam: float) -> "PriorConfig":
        return PriorConfig(lam, self.alpha, self.beta, self.max_iters, self.convergence, self.tol)


@dataclass
class FitResult:
    """Outcome of one estimator run on one unit."""

    tree: Forest
    pruned: Forest
    trace: EdgeTrace
    objective_per_iter: list[float]
    iterations: int
    converged: bool
    stop_reason: str = "converged"
    config: dict = field(default_factory=dict)

    def to_dict(self, labels: Sequence[str] | None = None, weights=None) -> dict:
        """JSON-compatible layout; vertices are 1-based, labels added when given."""

        def edge_rows(edges):
            rows = []
            for i, j in sorted(edges):
                row = {"i": i + 1, "j": j + 1}
                if labels is not None:
                    row["label_i"], row["label_j"] = labels[i], labels[j]
                if weights is not None:
                    row["weight"] = float(np.asarray(getattr(weights, "w", weights))[i, j])
                rows.append(row)
            return rows

        return {
            "d": self.tree.d,
            "tree_edges": edge_rows(self.tree.edges),
            "pruned_edges": edge_rows(self.pruned.edges),
            "insertion_order": [
                {"i": i + 1, "j": j + 1, "adjusted_weight": wt} for i, j, wt in self.trace
            ],
            "objective_per_iter": list(self.objective_per_iter),
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "config": dict(self.config),
        }


def _matrix(w) -> np.ndarray:
    return np.asarray(getattr(w, "w", w), dtype=float)


def _prune(trace: EdgeTrace, holdout_terms) -> Forest:
    if holdout_terms is None:
        return trace.prefix(len(trace))
    return prune_by_holdout(trace, holdout_terms)


def fit_fde(w, holdout_terms=None) -> FitResult:
    """Plain forest density estimate: one Kruskal pass, then held-out pruning.

    Without ``holdout_terms`` the full spanning tree is kept.
    """
    w = _matrix(w)
    tree, trace = kruskal(w)
    return FitResult(
        tree=tree,
        pruned=_prune(trace, holdout_terms),
        trace=trace,
        objective_per_iter=[tree.total_weight(w)],
        iterations=1,
        converged=True,
        config={"method": "fde"},
    )


def scalefree_objective(f: Forest, w, cfg: PriorConfig | float) -> float:
    """Summed edge weight minus ``lam`` times the summed log degree."""
    lam = cfg.lam if isinstance(cfg, PriorConfig) else float(cfg)
    w = _matrix(w)
    total = f.total_weight(w)
    if lam == 0:
        return total
    deg = f.degrees
    if np.any(deg == 0):
        raise ContractError("scale-free objective needs a spanning tree (a vertex has degree 0)")
    return total - lam * float(np.sum(np.log(deg)))


def scalefree_weights(w, degrees, lam: float) -> np.ndarray:
    """Adjusted weights ``w_ij - lam/deg_i - lam/deg_j`` at the current degrees."""
    w = _matrix(w)
    inv = lam / np.asarray(degrees, dtype=float)
    # sum the two penalties first so the result stays exactly symmetric
    adj = w - (inv[:, None] + inv[None, :])
    np.fill_diagonal(adj, 0.0)
    return adj


class _MMHistory:
    """Edge-set history for the convergence and cycling checks."""

    def __init__(self, cfg: PriorConfig):
        self.cfg = cfg
        self.seen: list = []
        self.objectives: list[float] = []

    def push(self, key, objective: float) -> str | None:
        """Record an iterate; return a stop reason or None to continue."""
        prev = self.seen[-1] if self.seen else None
        earlier = self.seen[:-1]
        self.seen.append(key)
        self.objectives.append(objective)
        if prev is None:
            return None
        if self.cfg.convergence == "edge_set":
            if key == prev:
                return "converged"
        elif abs(objective - self.objectives[-2]) <= self.cfg.tol:
            return "converged"
        if key in earlier:
            return "cycle"
        return None

    def best(self) -> int:
        # earliest among equal objectives
        return int(np.argmax(self.objectives))


def fit_scalefree(w, cfg: PriorConfig, holdout_terms=None) -> FitResult:
    """Scale-free forest estimate by minorize-maximization.

    Starts from the plain maximum spanning tree and repeatedly re-runs
    Kruskal on weights penalized by the inverse degrees of the current
    tree.  Stops when the edge set repeats (or, in ``objective`` mode, when
    the objective gain drops below ``cfg.tol``), on a limit cycle, or at
    ``cfg.max_iters``.  The iterate with the best objective is returned.
    """
    w = _matrix(w)
    tree, trace = kruskal(w)
    iterates = [(tree, trace)]
    hist = _MMHistory(cfg)
    hist.push(tree.edges, scalefree_objective(tree, w, cfg))
    reason = None
    while len(iterates) < cfg.max_iters:
        adjusted = scalefree_weights(w, tree.degrees, cfg.lam)
        tree, trace = kruskal(adjusted)
        iterates.append((tree, trace))
        reason = hist.push(tree.edges, scalefree_objective(tree, w, cfg))
        if reason:
            break
    k = len(iterates) - 1 if reason == "converged" else hist.best()
    tree, trace = iterates[k]
    return FitResult(
        tree=tree,
        pruned=_prune(trace, holdout_terms),
        trace=trace,
        objective_per_iter=list(hist.objectives),
        iterations=len(iterates),
        converged=reason is not None,
        stop_reason=reason or "max_iters",
        config={"method": "sf", **asdict(cfg)},
    )


def beta_penalty(k, cfg: PriorConfig, K: int):
    """``log B(alpha + k, beta + K - k)``; vectorized over ``k``."""
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k > K):
        raise ContractError(f"count must lie in [0, {K}]")
    val = gammaln(cfg.alpha + k) + gammaln(cfg.beta + K - k) - gammaln(cfg.alpha + cfg.beta + K)
    return float(val) if val.ndim == 0 else val


def sharing_adjustment(counts, cfg: PriorConfig, K: int):
    """Slope ``psi(alpha + c) - psi(beta + K - c)`` of the Beta penalty at count ``c``."""
    counts = np.asarray(counts, dtype=float)
    return digamma(cfg.alpha + counts) - digamma(cfg.beta + K - counts)


def edge_counts(forests: Sequence[Forest]) -> np.ndarray:
    """d x d matrix counting how many units contain each edge."""
    d = _common_d(forests)
    counts = np.zeros((d, d), dtype=int)
    for f in forests:
        for i, j in f.edges:
            counts[i, j] += 1
            counts[j, i] += 1
    return counts


def _common_d(forests: Sequence[Forest]) -> int:
    ds = {f.d for f in forests}
    if len(ds) != 1:
        raise ContractError(f"forests have different vertex counts: {sorted(ds)}")
    return ds.pop()


def joint_objective(forests: Sequence[Forest], weights: Sequence, cfg: PriorConfig) -> float:
    """Summed per-unit edge weights plus ``lam`` times the summed Beta penalty over all pairs."""
    if len(forests) != len(weights):
        raise ContractError(f"{len(forests)} forests but {len(weights)} weight matrices")
    d = _common_d(forests)
    mats = [_matrix(w) for w in weights]
    if any(m.shape != (d, d) for m in mats):
        raise ContractError("weight matrix dimension does not match the forests")
    total = sum(f.total_weight(m) for f, m in zip(forests, mats))
    if cfg.lam == 0:
        return float(total)
    K = len(forests)
    counts = edge_counts(forests)[np.triu_indices(d, 1)]
    return float(total + cfg.lam * np.sum(beta_penalty(counts, cfg, K)))


def fit_joint(weights: Sequence, cfg: PriorConfig, holdout_terms: Sequence | None = None) -> list[FitResult]:
    """Joint estimate of K forests that share structure, by minorize-maximization.

    Each unit starts from its own maximum spanning tree.  Every iteration
    counts how many units hold each edge, adds
    ``lam * (psi(alpha + c) - psi(beta + K - c))`` to every unit's weights
    and re-runs Kruskal per unit.  Stops when all K edge sets repeat, on a
    limit cycle, or at ``cfg.max_iters``; the best joint iterate is kept
    and each unit's tree is pruned on its own held-out terms.
    """
    mats = [_matrix(w) for w in weights]
    K = len(mats)
    if K < 2:
        raise ContractError(f"joint estimation needs K >= 2 units, got {K}")
    if len({m.shape for m in mats}) != 1:
        raise ContractError(f"weight matrices differ in shape: {[m.shape for m in mats]}")
    labels = [getattr(w, "labels", None) for w in weights]
    if all(lb is not None for lb in labels) and any(lb != labels[0] for lb in labels):
        raise ContractError("units have different variable labels")
    if holdout_terms is not None and len(holdout_terms) != K:
        raise ContractError(f"{len(holdout_terms)} held-out term sets for {K} units")

    fits = [kruskal(m) for m in mats]
    iterates = [fits]
    hist = _MMHistory(cfg)

    def key(fs):
        return tuple(f.edges for f, _ in fs)

    hist.push(key(fits), joint_objective([f for f, _ in fits], mats, cfg))
    reason = None
    while len(iterates) < cfg.max_iters:
        shift = cfg.lam * sharing_adjustment(edge_counts([f for f, _ in fits]), cfg, K)
        fits = []
        for m in mats:
            adj = m + shift
            np.fill_diagonal(adj, 0.0)
            fits.append(kruskal(adj))
        iterates.append(fits)
        reason = hist.push(key(fits), joint_objective([f for f, _ in fits], mats, cfg))
        if reason:
            break
    k = len(iterates) - 1 if reason == "converged" else hist.best()
    chosen = iterates[k]
    out = []
    for u, (tree, trace) in enumerate(chosen):
        terms = None if holdout_terms is None else holdout_terms[u]
        out.append(
            FitResult(
                tree=tree,
                pruned=_prune(trace, terms),
                trace=trace,
                objective_per_iter=list(hist.objectives),
                iterations=len(iterates),
                converged=reason is not None,
                stop_reason=reason or "max_iters",
                config={"method": "joint", "unit": u + 1, "K": K, **asdict(cfg)},
            )
        )
    return out


def lambda_grid(weights, multipliers: Sequence[float] = DEFAULT_LAMBDA_MULTIPLIERS) -> list[float]:
    """Penalty grid scaled by the mean off-diagonal weight (averaged over units when given several)."""
    mats = [_matrix(w) for w in weights] if isinstance(weights, (list, tuple)) else [_matrix(weights)]
    scale = float(np.mean([m[np.triu_indices(m.shape[0], 1)].mean() for m in mats]))
    if not math.isfinite(scale) or scale <= 0:
        scale = 1.0
    return [float(c) * scale for c in multipliers]
