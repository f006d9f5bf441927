"""Nonparametric forest graphical models with scale-free and multi-graph priors."""

__version__ = "0.1.0"

from .datagen import (
    CopulaSpec,
    GraphGenSpec,
    MultiGraphSpec,
    gen_graph,
    gen_multi,
    gen_scale_free,
    gen_stars,
    sample_tree_copula,
)
from .density import (
    Dataset,
    KernelConfig,
    WeightMatrix,
    estimate_entropy,
    estimate_mi,
    estimate_mi_discrete,
    holdout_term_matrix,
    kde_bivariate,
    kde_univariate,
    pairwise_holdout_term,
    weight_matrix,
)
from .evaluation import ScoreReport, common_edges, f1_score, holdout_loglik, tune
from .forest import DisjointSet, EdgeTrace, Forest, degree, kruskal, prune_by_holdout
from .solvers import (
    FitResult,
    PriorConfig,
    beta_penalty,
    fit_fde,
    fit_joint,
    fit_scalefree,
    joint_objective,
    scalefree_objective,
)
