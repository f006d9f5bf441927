"""Replication drivers for the synthetic comparison of FDE against its penalized variants.

One replication draws a true graph (or K related graphs), samples
training and held-out data from a tree copula, estimates weights and
held-out terms, and scores each method's pruned forest by F1.  Rows are
one per replication and method.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import CopulaSpec, GraphGenSpec, MultiGraphSpec, gen_graph, gen_multi, sample_tree_copula
from .density import Dataset, KernelConfig, holdout_term_matrix, weight_matrix
from .evaluation import common_edges, f1_score, holdout_loglik, tune
from .forest import Forest
from .solvers import DEFAULT_LAMBDA_MULTIPLIERS, PriorConfig, fit_fde, fit_joint, fit_scalefree, lambda_grid


@dataclass(frozen=True)
class StudySettings:
    graph: str = "stars"
    family: str = "gaussian"
    rho: float = 0.4
    nu: float = 1.0
    d: int = 100
    num_stars: int = 5
    star_size: int = 20
    alpha_pa: float = 1.5
    n: int = 200
    n_holdout: int = 100
    K: int = 3
    shared_size: int = 80
    shared_stars: int = 4
    alpha: float = 1.0
    beta: float = 1.0
    tuning: str = "oracle"
    multipliers: tuple = DEFAULT_LAMBDA_MULTIPLIERS
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def graph_spec(self, seed: int) -> GraphGenSpec:
        return GraphGenSpec(
            kind=self.graph,
            d=self.d,
            alpha_pa=self.alpha_pa,
            num_stars=self.num_stars,
            star_size=self.star_size,
            rng_seed=seed,
        )


def replication_seeds(seed: int, rep: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence([seed, rep]).generate_state(count)]


def simulate_split(tree: Forest, family: str, rho: float, nu: float, n: int, n_holdout: int, seed: int):
    """Training and held-out datasets drawn in one pass from the same tree copula."""
    ds = sample_tree_copula(tree, CopulaSpec(family=family, rho=rho, nu=nu, n=n + n_holdout, rng_seed=seed))
    return Dataset(ds.values[:n], ds.column_names), Dataset(ds.values[n:], ds.column_names)


def _row(rep, method, report, **extra):
    return {
        "rep": rep,
        "method": method,
        "f1": report.f1,
        "precision": report.precision,
        "recall": report.recall,
        **extra,
    }


def hub_replication(settings: StudySettings, rep: int, seed: int = 0) -> list[dict]:
    """FDE and SF-FDE on one simulated graph with hubs."""
    graph_seed, data_seed = replication_seeds(seed, rep, 2)
    truth = gen_graph(settings.graph_spec(graph_seed))
    family = "student_t" if settings.family in ("t", "student_t") else settings.family
    train, hold = simulate_split(truth, family, settings.rho, settings.nu, settings.n, settings.n_holdout, data_seed)
    w = weight_matrix(train, settings.kernel)
    terms = holdout_term_matrix(train, hold, settings.kernel)

    fde = fit_fde(w, terms)
    prior = PriorConfig(alpha=settings.alpha, beta=settings.beta)
    tuned = tune(
        lambda lam: fit_scalefree(w, prior.with_lambda(lam), terms),
        lambda_grid(w, settings.multipliers),
        mode="held_out" if settings.tuning == "held_out" else "oracle",
        holdout_terms=terms,
        truth=truth,
    )
    return [
        _row(rep, "FDE", f1_score(fde.pruned, truth), lam=0.0, holdout_loglik=holdout_loglik(fde.pruned, terms)),
        _row(
            rep,
            "SF-FDE",
            f1_score(tuned.result.pruned, truth),
            lam=tuned.best_lambda,
            holdout_loglik=holdout_loglik(tuned.result.pruned, terms),
        ),
    ]


def multi_replication(settings: StudySettings, rep: int, seed: int = 0) -> list[dict]:
    """Independent FDE per unit and J-FDE on K related graphs; F1 is averaged over units."""
    seeds = replication_seeds(seed, rep, settings.K + 1)
    base = settings.graph_spec(seeds[0])
    truths = gen_multi(
        MultiGraphSpec(
            K=settings.K, base=base, shared_size=settings.shared_size, shared_stars=settings.shared_stars,
            rng_seed=seeds[0],
        )
    )
    family = "student_t" if settings.family in ("t", "student_t") else settings.family
    weights, terms = [], []
    for truth, s in zip(truths, seeds[1:]):
        train, hold = simulate_split(truth, family, settings.rho, settings.nu, settings.n, settings.n_holdout, s)
        weights.append(weight_matrix(train, settings.kernel))
        terms.append(holdout_term_matrix(train, hold, settings.kernel))

    fde = [fit_fde(w, t) for w, t in zip(weights, terms)]
    prior = PriorConfig(alpha=settings.alpha, beta=settings.beta)
    tuned = tune(
        lambda lam: fit_joint(weights, prior.with_lambda(lam), terms),
        lambda_grid(weights, settings.multipliers),
        mode="held_out" if settings.tuning == "held_out" else "oracle",
        holdout_terms=terms,
        truth=truths,
    )

    def summary(fits, method, lam):
        reports = [f1_score(f.pruned, t) for f, t in zip(fits, truths)]
        return {
            "rep": rep,
            "method": method,
            "f1": float(np.mean([r.f1 for r in reports])),
            "precision": float(np.mean([r.precision for r in reports])),
            "recall": float(np.mean([r.recall for r in reports])),
            "lam": lam,
            "holdout_loglik": sum(holdout_loglik(f.pruned, t) for f, t in zip(fits, terms)),
            "common_edges": len(common_edges([f.pruned for f in fits])),
        }

    return [summary(fde, "FDE", 0.0), summary(tuned.result, "J-FDE", tuned.best_lambda)]


def run_study(settings: StudySettings, study: str = "hubs", reps: int = 10, seed: int = 0) -> list[dict]:
    """All replication rows for ``study`` in ``{"hubs", "multi"}``."""
    driver = hub_replication if study == "hubs" else multi_replication
    rows = []
    for rep in range(reps):
        rows.extend(driver(settings, rep, seed))
    return rows


def mean_by_method(rows: list[dict], key: str = "f1") -> dict[str, float]:
    methods = sorted({r["method"] for r in rows})
    return {m: float(np.mean([r[key] for r in rows if r["method"] == m])) for m in methods}
