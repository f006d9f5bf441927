"""Acceptance criteria, one test each, at the stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal
summary.  The simulation studies (criteria 4 to 6) take a few minutes.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from conftest import all_spanning_trees, gaussian_copula_pair, random_symmetric
from forestprior.datagen import CopulaSpec, GraphGenSpec, gen_scale_free, sample_tree_copula
from forestprior.density import estimate_mi
from forestprior.experiments import StudySettings, mean_by_method, run_study
from forestprior.forest import EdgeTrace, Forest, kruskal, prune_by_holdout
from forestprior.solvers import PriorConfig, fit_fde, fit_joint, fit_scalefree, sharing_adjustment

MARGIN = 0.03
FDE_FLOOR = 0.6
REPS = 10


def _tree_weight(w, edges):
    return math.fsum(w[i, j] for i, j in edges)


def test_criterion_1_mst_matches_enumeration(acceptance):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    mismatches = 0
    trees = {d: [sorted(t) for t in all_spanning_trees(d)] for d in (4, 5, 6)}
    for k in range(200):
        d = (4, 5, 6)[k % 3]
        w = random_symmetric(rng, d)
        best = max(trees[d], key=lambda t: _tree_weight(w, t))
        f, _ = kruskal(w)
        if f.sorted_edges() != best or _tree_weight(w, f.sorted_edges()) != _tree_weight(w, best):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10
    acceptance(1, ok, f"{mismatches}/200 mismatches, {elapsed:.1f}s")
    assert ok


def test_criterion_2_mi_oracle(acceptance):
    start = time.perf_counter()
    target = -0.5 * math.log(1 - 0.4**2)
    dep, ind = [], []
    for seed in range(20):
        r = np.random.default_rng(seed)
        dep.append(estimate_mi(*gaussian_copula_pair(r, 2000, 0.4)))
        ind.append(estimate_mi(r.uniform(size=2000), r.uniform(size=2000)))
    elapsed = time.perf_counter() - start
    ok = abs(np.mean(dep) - target) <= 0.03 and np.mean(ind) < 0.03 and elapsed < 60
    acceptance(2, ok, f"dependent mean {np.mean(dep):.4f} vs {target:.4f}, independent mean {np.mean(ind):.4f}, {elapsed:.1f}s")
    assert ok


def _monotone(trace, slack=1e-9):
    return all(b >= a - slack for a, b in zip(trace, trace[1:]))


def test_criterion_3_mm_monotone(acceptance):
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    bad = 0
    for _ in range(100):
        d = int(rng.integers(3, 31))
        w = np.abs(random_symmetric(rng, d))
        lam = float(rng.uniform(0, 1.0))
        bad += not _monotone(fit_scalefree(w, PriorConfig(lam=lam)).objective_per_iter)
    for _ in range(50):
        d, K = int(rng.integers(3, 31)), int(rng.integers(2, 5))
        base = np.abs(random_symmetric(rng, d))
        ws = [base + 0.5 * np.abs(random_symmetric(rng, d)) for _ in range(K)]
        cfg = PriorConfig(lam=float(rng.uniform(0, 2.0)), alpha=float(rng.uniform(0.5, 3)), beta=float(rng.uniform(0.5, 3)))
        bad += not _monotone(fit_joint(ws, cfg)[0].objective_per_iter)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 300
    acceptance(3, ok, f"{bad}/150 non-monotone traces, {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def studies():
    """Mean F1 and common-edge counts per study, computed on first use."""
    cache = {}

    def get(study, graph, family):
        key = (study, graph, family)
        if key not in cache:
            rho = 0.4 if family == "gaussian" else 0.25
            start = time.perf_counter()
            rows = run_study(StudySettings(graph=graph, family=family, rho=rho, nu=1.0), study, reps=REPS, seed=0)
            cache[key] = (rows, time.perf_counter() - start)
        return cache[key]

    return get


def _hub_check(studies, graph, family):
    rows, elapsed = studies("hubs", graph, family)
    means = mean_by_method(rows)
    ok = means["SF-FDE"] >= means["FDE"] + MARGIN and means["FDE"] >= FDE_FLOOR
    return ok, f"{graph}: FDE {means['FDE']:.3f}, SF-FDE {means['SF-FDE']:.3f}", elapsed


def _multi_check(studies, family):
    rows, elapsed = studies("multi", "scale_free", family)
    means = mean_by_method(rows)
    fde = [r["common_edges"] for r in rows if r["method"] == "FDE"]
    jnt = [r["common_edges"] for r in rows if r["method"] == "J-FDE"]
    wins = sum(j >= f for f, j in zip(fde, jnt))
    ok = means["J-FDE"] >= means["FDE"] + MARGIN and means["FDE"] >= FDE_FLOOR and wins >= 8
    return ok, f"FDE {means['FDE']:.3f}, J-FDE {means['J-FDE']:.3f}, common edges J-FDE >= FDE in {wins}/{REPS}", elapsed


@pytest.mark.slow
def test_criterion_4_hubs(acceptance, studies):
    results = [_hub_check(studies, g, "gaussian") for g in ("stars", "scale_free")]
    elapsed = sum(r[2] for r in results)
    ok = all(r[0] for r in results) and elapsed < 1800
    acceptance(4, ok, "; ".join(r[1] for r in results) + f"; {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_5_multiple_graphs(acceptance, studies):
    ok, detail, elapsed = _multi_check(studies, "gaussian")
    ok = ok and elapsed < 2700
    acceptance(5, ok, f"{detail}; {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_6_t_copula(acceptance, studies):
    results = [_hub_check(studies, g, "student_t") for g in ("stars", "scale_free")]
    results.append(_multi_check(studies, "student_t"))
    ok = all(r[0] for r in results)
    acceptance(6, ok, "; ".join(r[1] for r in results))
    assert ok


def test_criterion_7_copula_sampler(acceptance):
    start = time.perf_counter()
    passed = 0
    for k in range(5):
        family, rho = ("gaussian", 0.4) if k % 2 == 0 else ("student_t", 0.25)
        tree = gen_scale_free(GraphGenSpec(d=20, rng_seed=k))
        u = sample_tree_copula(tree, CopulaSpec(family=family, rho=rho, n=5000, rng_seed=100 + k)).values
        passed += sum(stats.kstest(u[:, c], "uniform").pvalue >= 0.01 for c in range(20))
    path = Forest.from_edges(2, [(0, 1)])
    u = sample_tree_copula(path, CopulaSpec(family="gaussian", rho=0.4, n=5000, rng_seed=7)).values
    spearman = stats.spearmanr(u[:, 0], u[:, 1]).statistic
    target = 6 / math.pi * math.asin(0.2)
    elapsed = time.perf_counter() - start
    ok = passed >= 95 and abs(spearman - target) <= 0.03 and elapsed < 120
    acceptance(7, ok, f"KS {passed}/100 columns, Spearman {spearman:.4f} vs {target:.4f}, {elapsed:.1f}s")
    assert ok


def _harmonic(m):
    return math.fsum(1.0 / i for i in range(1, m + 1))


def test_criterion_8_reductions(acceptance):
    rng = np.random.default_rng(8)
    mismatched = 0
    for _ in range(50):
        d = int(rng.integers(3, 25))
        w = np.abs(random_symmetric(rng, d))
        mismatched += fit_scalefree(w, PriorConfig(lam=0.0)).tree != fit_fde(w).tree
        ws = [np.abs(random_symmetric(rng, d)) for _ in range(3)]
        mismatched += [r.tree for r in fit_joint(ws, PriorConfig(lam=0.0))] != [fit_fde(x).tree for x in ws]
    # with alpha = beta = 1: psi(1 + c) - psi(1 + K - c) = H_c - H_{K-c}
    worst = 0.0
    cfg = PriorConfig()
    for K in range(1, 11):
        for c in range(K + 1):
            worst = max(worst, abs(sharing_adjustment(c, cfg, K) - (_harmonic(c) - _harmonic(K - c))))
    ok = mismatched == 0 and worst <= 1e-12
    acceptance(8, ok, f"{mismatched} edge-set mismatches over 100 fits, max digamma error {worst:.1e}")
    assert ok


def test_criterion_9_pruning_oracle(acceptance):
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(1000):
        m = int(rng.integers(0, 30))
        terms = rng.normal(size=m).tolist()
        trace = EdgeTrace(m + 1, tuple((i, i + 1, 0.0) for i in range(m)))
        sums = [math.fsum(terms[:k]) for k in range(m + 1)]
        best = max(sums)
        k_star = min(k for k in range(m + 1) if sums[k] == best)
        bad += prune_by_holdout(trace, terms) != trace.prefix(k_star)
    acceptance(9, bad == 0, f"{bad}/1000 disagreements")
    assert bad == 0
