"""Edge-recovery scores, common-edge accounting, held-out likelihood and tuning."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ForestPriorError
from .forest import Forest
from .solvers import FitResult


@dataclass
class ScoreReport:
    true_positive: int
    false_positive: int
    false_negative: int
    precision: float
    recall: float
    f1: float
    holdout_loglik: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def f1_score(estimated: Forest, truth: Forest) -> ScoreReport:
    """Precision, recall and F1 of the estimated edge set against the true one.

    Two empty edge sets count as perfect agreement (F1 = 1).
    """
    if estimated.d != truth.d:
        raise ContractError(f"vertex counts differ: estimated d={estimated.d}, truth d={truth.d}")
    tp = len(estimated.edges & truth.edges)
    fp = len(estimated.edges) - tp
    fn = len(truth.edges) - tp
    if not estimated.edges and not truth.edges:
        return ScoreReport(0, 0, 0, 1.0, 1.0, 1.0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ScoreReport(tp, fp, fn, precision, recall, f1)


def common_edges(forests: Sequence[Forest]) -> frozenset:
    """Edges present in every unit."""
    if not forests:
        return frozenset()
    ds = {f.d for f in forests}
    if len(ds) != 1:
        raise ContractError(f"forests have different vertex counts: {sorted(ds)}")
    out = forests[0].edges
    for f in forests[1:]:
        out = out & f.edges
    return frozenset(out)


def holdout_loglik(forest: Forest, terms, entropies=None) -> float:
    """Sum of pairwise held-out terms over the forest's edges.

    ``terms`` is a d x d matrix or a mapping from ``(i, j)`` (``i < j``) to a
    term.  Passing per-variable ``entropies`` subtracts their sum, putting
    the score on the absolute log-likelihood scale.
    """
    total = 0.0
    if isinstance(terms, dict):
        for e in sorted(forest.edges):
            if e not in terms:
                raise ContractError(f"no held-out term for edge {e}")
            total += float(terms[e])
    else:
        terms = np.asarray(terms, dtype=float)
        if terms.shape != (forest.d, forest.d):
            raise ContractError(f"term matrix has shape {terms.shape}, expected {(forest.d, forest.d)}")
        for i, j in sorted(forest.edges):
            total += float(terms[i, j])
    if entropies is not None:
        total -= float(np.sum(entropies))
    return total


@dataclass
class TuneResult:
    best_lambda: float
    result: FitResult | list[FitResult]
    scores: list[float]
    grid: list[float]


def _units(result) -> list[FitResult]:
    return list(result) if isinstance(result, (list, tuple)) else [result]


def tune(
    fit: Callable[[float], FitResult | list[FitResult]],
    grid: Sequence[float],
    mode: str = "held_out",
    *,
    holdout_terms=None,
    truth=None,
) -> TuneResult:
    """Run ``fit(lam)`` over ``grid`` and keep the best-scoring penalty.

    ``held_out`` mode scores the pruned forests by summed held-out terms
    (``holdout_terms`` is one matrix, or one per unit).  ``oracle`` mode
    scores by mean F1 against ``truth`` (a forest, or one per unit).  Ties
    go to the smaller penalty.
    """
    if len(grid) == 0:
        raise ContractError("empty lambda grid")
    if mode not in ("held_out", "oracle"):
        raise ContractError(f"unknown tuning mode {mode!r}")
    if mode == "held_out" and holdout_terms is None:
        raise ContractError("held-out tuning needs holdout_terms")
    if mode == "oracle" and truth is None:
        raise ContractError("oracle tuning needs the true graph(s)")

    ordered = sorted(float(g) for g in grid)
    scores, results = [], []
    for lam in ordered:
        try:
            res = fit(lam)
        except ForestPriorError as exc:
            raise type(exc)(f"at lambda={lam}: {exc}") from exc
        units = _units(res)
        if mode == "held_out":
            tlist = holdout_terms if isinstance(holdout_terms, (list, tuple)) else [holdout_terms]
            score = sum(holdout_loglik(u.pruned, t) for u, t in zip(units, tlist))
        else:
            truths = truth if isinstance(truth, (list, tuple)) else [truth]
            score = float(np.mean([f1_score(u.pruned, t).f1 for u, t in zip(units, truths)]))
        scores.append(score)
        results.append(res)
    best = 0
    for k in range(1, len(ordered)):
        if scores[k] > scores[best]:
            best = k
    return TuneResult(ordered[best], results[best], scores, ordered)
