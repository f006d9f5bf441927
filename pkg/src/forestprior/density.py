"""Kernel and empirical estimates of marginal densities and mutual information.

Every tree estimator in the package consumes a :class:`WeightMatrix` of
pairwise mutual informations.  For continuous data these come from plug-in
kernel density estimates integrated on a per-column grid; for categorical
codes the empirical contingency table is used instead.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    ContractError,
    DegenerateColumnWarning,
    EstimationError,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)
KERNELS = ("gaussian", "epanechnikov")
H1_RULES = ("silverman",)
H2_RULES = ("scott",)


@dataclass
class Dataset:
    """An n x d sample matrix with unique column names."""

    values: np.ndarray
    column_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise EstimationError(f"expected a 2-d sample matrix, got shape {values.shape}")
        n, d = values.shape
        if n < 2 or d < 2:
            raise EstimationError(f"need n >= 2 and d >= 2, got n={n}, d={d}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise EstimationError(f"missing or non-finite entry at row {bad[0] + 1}, column {bad[1] + 1}")
        names = list(self.column_names) or [f"X{k + 1}" for k in range(d)]
        if len(names) != d:
            raise EstimationError(f"{len(names)} column names for {d} columns")
        if len(set(names)) != d:
            dupes = sorted({c for c in names if names.count(c) > 1})
            raise EstimationError(f"duplicate column names: {dupes}")
        self.values = values
        self.column_names = names

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family, bandwidths (numeric or rule tag), grid size and density floor."""

    kernel: str = "gaussian"
    h1: float | str = "silverman"
    h2: float | str = "scott"
    grid_points: int = 100
    floor: float = 1e-10

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}; choose from {KERNELS}")
        if self.grid_points < 16:
            raise ConfigurationError(f"grid_points must be >= 16, got {self.grid_points}")
        if not 0.0 < self.floor < 1e-6:
            raise ConfigurationError(f"floor must lie in (0, 1e-6), got {self.floor}")
        for name, value, rules in (("h1", self.h1, H1_RULES), ("h2", self.h2, H2_RULES)):
            if isinstance(value, str):
                if value not in rules:
                    raise ConfigurationError(f"unknown {name} rule {value!r}; choose from {rules}")
            elif not value > 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")

    def bandwidths(self, column: np.ndarray) -> tuple[float, float]:
        """Resolve ``(h1, h2)`` for one column.

        Rule tags use the column's sample standard deviation: Silverman's
        ``1.06 sd n^(-1/5)`` for the univariate estimate and ``sd n^(-1/6)``
        per axis for the bivariate product kernel.
        """
        n = len(column)
        sd = float(np.std(column, ddof=1)) if n > 1 else 0.0
        h1 = 1.06 * sd * n ** (-1 / 5) if isinstance(self.h1, str) else float(self.h1)
        h2 = sd * n ** (-1 / 6) if isinstance(self.h2, str) else float(self.h2)
        return h1, h2


@dataclass
class WeightMatrix:
    """Symmetric d x d matrix of edge weights with zero diagonal."""

    w: np.ndarray
    labels: list[str]

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ContractError(f"weight matrix must be square, got shape {w.shape}")
        if len(self.labels) != w.shape[0]:
            raise ContractError(f"{len(self.labels)} labels for a {w.shape[0]}x{w.shape[0]} matrix")
        self.w = w
        self.labels = list(self.labels)

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def mean_offdiagonal(self) -> float:
        iu = np.triu_indices(self.d, 1)
        return float(self.w[iu].mean())


def kernel_function(name: str):
    if name == "gaussian":
        return lambda u: np.exp(-0.5 * u * u) / SQRT_2PI
    if name == "epanechnikov":
        return lambda u: np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    raise ConfigurationError(f"unknown kernel {name!r}")


def _check_column(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise EstimationError("empty column")
    if not np.all(np.isfinite(x)):
        raise EstimationError("non-finite entry in column")
    return x


def _is_degenerate(x: np.ndarray) -> bool:
    return bool(np.all(x == x[0]))


def _kernel_matrix(data: np.ndarray, points: np.ndarray, h: float, kernel: str) -> np.ndarray:
    """``K((data[t] - points[g]) / h) / h`` as an n x len(points) array."""
    K = kernel_function(kernel)
    return K((data[:, None] - points[None, :]) / h) / h


def _require_bandwidth(h: float, name: str) -> None:
    if not h > 0:
        raise ConfigurationError(f"{name} resolved to {h}; the column is constant or the override is invalid")


def kde_univariate(data, cfg: KernelConfig, x) -> float | np.ndarray:
    """Univariate kernel density estimate at ``x`` (scalar or array), clamped at ``cfg.floor``."""
    data = _check_column(data)
    h1, _ = cfg.bandwidths(data)
    _require_bandwidth(h1, "h1")
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    dens = np.maximum(_kernel_matrix(data, pts, h1, cfg.kernel).mean(axis=0), cfg.floor)
    return float(dens[0]) if np.ndim(x) == 0 else dens


def kde_bivariate(data_i, data_j, cfg: KernelConfig, x_i, x_j) -> float | np.ndarray:
    """Product-kernel bivariate density estimate at ``(x_i, x_j)``, clamped at ``cfg.floor``."""
    a, b = _check_column(data_i), _check_column(data_j)
    if a.size != b.size:
        raise EstimationError(f"columns differ in length ({a.size} vs {b.size})")
    _, ha = cfg.bandwidths(a)
    _, hb = cfg.bandwidths(b)
    _require_bandwidth(ha, "h2")
    _require_bandwidth(hb, "h2")
    pi = np.atleast_1d(np.asarray(x_i, dtype=float))
    pj = np.atleast_1d(np.asarray(x_j, dtype=float))
    ka = _kernel_matrix(a, pi, ha, cfg.kernel)
    kb = _kernel_matrix(b, pj, hb, cfg.kernel)
    dens = np.maximum((ka * kb).mean(axis=0), cfg.floor)
    return float(dens[0]) if np.ndim(x_i) == 0 else dens


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    step = grid[1] - grid[0]
    wts = np.full(grid.size, step)
    wts[0] = wts[-1] = step / 2
    return wts


class _ColumnGrid:
    """Per-column quantities reused by every pair the column takes part in."""

    __slots__ = ("grid", "weights", "log_marginal", "marginal", "kmat", "key")

    def __init__(self, x: np.ndarray, cfg: KernelConfig):
        h1, h2 = cfg.bandwidths(x)
        _require_bandwidth(h1, "h1")
        _require_bandwidth(h2, "h2")
        pad = 3.0 * max(h1, h2)
        self.grid = np.linspace(x.min() - pad, x.max() + pad, cfg.grid_points)
        self.weights = _trapezoid_weights(self.grid)
        self.marginal = np.maximum(_kernel_matrix(x, self.grid, h1, cfg.kernel).mean(axis=0), cfg.floor)
        self.log_marginal = np.log(self.marginal)
        self.kmat = _kernel_matrix(x, self.grid, h2, cfg.kernel)
        self.key = x.tobytes()


def _pair_mi(ga: _ColumnGrid, gb: _ColumnGrid, floor: float) -> float:
    # fixed argument order keeps I(a;b) == I(b;a) bit for bit
    if gb.key < ga.key:
        ga, gb = gb, ga
    n = ga.kmat.shape[0]
    joint = np.maximum(ga.kmat.T @ gb.kmat / n, floor)
    integrand = joint * (np.log(joint) - ga.log_marginal[:, None] - gb.log_marginal[None, :])
    return max(float(ga.weights @ integrand @ gb.weights), 0.0)


def _warn_degenerate(what: str) -> None:
    warnings.warn(f"{what} has zero variance; using the fallback value 0", DegenerateColumnWarning, stacklevel=3)


def estimate_mi(data_i, data_j, cfg: KernelConfig | None = None) -> float:
    """Plug-in mutual information of two columns from kernel density estimates.

    The bivariate and univariate estimates are evaluated on a
    ``G x G`` grid spanning each column's range padded by three bandwidths
    and the integral is taken with the trapezoidal rule.  Negative values
    from quadrature error are clamped to 0.  A constant column yields 0
    and a :class:`DegenerateColumnWarning`.
    """
    cfg = cfg or KernelConfig()
    a, b = _check_column(data_i), _check_column(data_j)
    if a.size != b.size:
        raise EstimationError(f"columns differ in length ({a.size} vs {b.size})")
    if a.size < 2:
        raise EstimationError("need at least 2 samples")
    if _is_degenerate(a) or _is_degenerate(b):
        _warn_degenerate("a column")
        return 0.0
    return _pair_mi(_ColumnGrid(a, cfg), _ColumnGrid(b, cfg), cfg.floor)


def _codes(x) -> tuple[np.ndarray, int]:
    x = np.asarray(x).ravel()
    if x.size == 0:
        raise EstimationError("empty column")
    if x.dtype.kind == "f" and not np.all(np.isfinite(x)):
        raise EstimationError("non-finite entry in column")
    levels, inv = np.unique(x, return_inverse=True)
    return inv.ravel(), levels.size


def contingency_table(data_i, data_j) -> np.ndarray:
    """Joint count table of two categorical columns (rows: levels of ``data_i``)."""
    ca, ka = _codes(data_i)
    cb, kb = _codes(data_j)
    if ca.size != cb.size:
        raise EstimationError(f"columns differ in length ({ca.size} vs {cb.size})")
    return np.bincount(ca * kb + cb, minlength=ka * kb).reshape(ka, kb)


def mi_from_counts(table: np.ndarray) -> float:
    """Plug-in MI of a count table, with 0 log 0 = 0."""
    table = np.asarray(table, dtype=float)
    n = table.sum()
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    nz = table > 0
    # counts are integers so n*c == r*s exactly for product tables
    ratio = (table * n)[nz] / (rows * cols)[nz]
    return float(np.sum(table[nz] / n * np.log(ratio)))


def estimate_mi_discrete(data_i, data_j) -> float:
    """Plug-in MI of two columns of categorical codes from their empirical joint table."""
    return mi_from_counts(contingency_table(data_i, data_j))


def estimate_entropy(data, cfg: KernelConfig | None = None) -> float:
    """Differential entropy ``-int p log p`` of the univariate KDE on the padded grid.

    A constant column returns 0 with a :class:`DegenerateColumnWarning`.
    """
    cfg = cfg or KernelConfig()
    x = _check_column(data)
    if _is_degenerate(x):
        _warn_degenerate("column")
        return 0.0
    g = _ColumnGrid(x, cfg)
    return float(-g.weights @ (g.marginal * g.log_marginal))


def _map_rows(fn, rows: Sequence[int], n_jobs: int):
    if n_jobs and n_jobs > 1 and len(rows) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, rows))
    return [fn(r) for r in rows]


def weight_matrix(data: Dataset, cfg: KernelConfig | None = None, mode: str = "kde", n_jobs: int = 1) -> WeightMatrix:
    """Fill all pairwise MI estimates of ``data`` into a symmetric :class:`WeightMatrix`.

    ``mode`` is ``"kde"`` for continuous data or ``"discrete"`` for
    categorical codes.  Rows may be computed on ``n_jobs`` threads; the
    result does not depend on the schedule.
    """
    cfg = cfg or KernelConfig()
    d = data.d
    w = np.zeros((d, d))
    if mode == "discrete":
        codes = [_codes(data.column(i)) for i in range(d)]

        def row(i):
            out = []
            ca, _ = codes[i]
            for j in range(i + 1, d):
                cb, kb = codes[j]
                table = np.bincount(ca * kb + cb, minlength=codes[i][1] * kb).reshape(codes[i][1], kb)
                out.append(mi_from_counts(table))
            return out

    elif mode == "kde":
        degenerate = [_is_degenerate(data.column(i)) for i in range(d)]
        for i in np.flatnonzero(degenerate):
            _warn_degenerate(f"column {data.column_names[i]!r}")
        grids = [None if degenerate[i] else _ColumnGrid(data.column(i), cfg) for i in range(d)]

        def row(i):
            out = []
            for j in range(i + 1, d):
                if grids[i] is None or grids[j] is None:
                    out.append(0.0)
                    continue
                try:
                    out.append(_pair_mi(grids[i], grids[j], cfg.floor))
                except Exception as exc:  # pragma: no cover - defensive
                    raise EstimationError(
                        f"pair ({data.column_names[i]}, {data.column_names[j]}): {exc}"
                    ) from exc
            return out

    else:
        raise ConfigurationError(f"unknown weight mode {mode!r}; use 'kde' or 'discrete'")

    for i, vals in zip(range(d), _map_rows(row, list(range(d)), n_jobs)):
        w[i, i + 1:] = vals
        w[i + 1:, i] = vals
    return WeightMatrix(w, list(data.column_names))


def _holdout_pair(ka, kb, la, lb, floor) -> float:
    n = ka.shape[0]
    joint = np.maximum(np.einsum("tm,tm->m", ka, kb) / n, floor)
    return float(np.mean(np.log(joint) - la - lb))


def _holdout_parts(train_col, hold_col, cfg):
    h1, h2 = cfg.bandwidths(train_col)
    _require_bandwidth(h1, "h1")
    _require_bandwidth(h2, "h2")
    marg = np.maximum(_kernel_matrix(train_col, hold_col, h1, cfg.kernel).mean(axis=0), cfg.floor)
    return _kernel_matrix(train_col, hold_col, h2, cfg.kernel), np.log(marg)


def pairwise_holdout_term(train_i, train_j, hold_i, hold_j, cfg: KernelConfig | None = None) -> float:
    """Mean held-out log density ratio ``log p_ij / (p_i p_j)`` for one candidate edge.

    Densities are fitted on the training columns and evaluated at the
    held-out rows; each is clamped at ``cfg.floor`` before the log.
    """
    cfg = cfg or KernelConfig()
    a, b = _check_column(train_i), _check_column(train_j)
    ya, yb = _check_column(hold_i), _check_column(hold_j)
    if a.size != b.size or ya.size != yb.size:
        raise EstimationError("paired columns differ in length")
    ka, la = _holdout_parts(a, ya, cfg)
    kb, lb = _holdout_parts(b, yb, cfg)
    return _holdout_pair(ka, kb, la, lb, cfg.floor)


def pairwise_holdout_term_discrete(train_i, train_j, hold_i, hold_j, floor: float = 1e-10) -> float:
    """Held-out log ratio for categorical data using empirical training frequencies.

    Codes unseen in training receive probability ``floor``.
    """
    a, b = np.asarray(train_i).ravel(), np.asarray(train_j).ravel()
    ya, yb = np.asarray(hold_i).ravel(), np.asarray(hold_j).ravel()
    la, ia = np.unique(a, return_inverse=True)
    lb, ib = np.unique(b, return_inverse=True)
    n = a.size
    joint = np.bincount(ia * lb.size + ib, minlength=la.size * lb.size).reshape(la.size, lb.size) / n
    pa, pb = joint.sum(axis=1), joint.sum(axis=0)
    pos_a = np.searchsorted(la, ya).clip(0, la.size - 1)
    pos_b = np.searchsorted(lb, yb).clip(0, lb.size - 1)
    seen_a = la[pos_a] == ya
    seen_b = lb[pos_b] == yb
    pj = np.where(seen_a & seen_b, joint[pos_a, pos_b], 0.0)
    pma = np.where(seen_a, pa[pos_a], 0.0)
    pmb = np.where(seen_b, pb[pos_b], 0.0)
    logs = np.log(np.maximum(pj, floor)) - np.log(np.maximum(pma, floor)) - np.log(np.maximum(pmb, floor))
    return float(np.mean(logs))


def holdout_term_matrix(
    train: Dataset, holdout: Dataset, cfg: KernelConfig | None = None, mode: str = "kde", n_jobs: int = 1
) -> np.ndarray:
    """Symmetric d x d matrix of pairwise held-out terms for every candidate edge."""
    cfg = cfg or KernelConfig()
    if train.column_names != holdout.column_names:
        missing = sorted(set(train.column_names) ^ set(holdout.column_names))
        raise ContractError(f"train and held-out columns differ: {missing or 'order differs'}")
    d = train.d
    terms = np.zeros((d, d))
    if mode == "discrete":

        def row(i):
            return [
                pairwise_holdout_term_discrete(
                    train.column(i), train.column(j), holdout.column(i), holdout.column(j), cfg.floor
                )
                for j in range(i + 1, d)
            ]

    elif mode == "kde":
        parts = [
            None if _is_degenerate(train.column(i)) else _holdout_parts(train.column(i), holdout.column(i), cfg)
            for i in range(d)
        ]

        def row(i):
            out = []
            for j in range(i + 1, d):
                if parts[i] is None or parts[j] is None:
                    out.append(0.0)
                else:
                    out.append(_holdout_pair(parts[i][0], parts[j][0], parts[i][1], parts[j][1], cfg.floor))
            return out

    else:
        raise ConfigurationError(f"unknown weight mode {mode!r}; use 'kde' or 'discrete'")

    for i, vals in zip(range(d), _map_rows(row, list(range(d)), n_jobs)):
        terms[i, i + 1:] = vals
        terms[i + 1:, i] = vals
    return terms
