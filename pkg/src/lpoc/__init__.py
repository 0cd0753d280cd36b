"""Penalized MAP estimation of large correlation matrices.

Estimates a correlation matrix for multivariate forecast errors from short
time series, shrinking a-priori implausible entries toward zero with an
elementwise Laplace prior, and provides the surrounding pipeline: AR(1)
error extraction, regularization-parameter selection, covariate screening
for the penalty matrix, baseline estimators, a simulation-study harness,
and correlated forecast ensembles scored by CRPS.
"""

from . import errors
from .baselines import ErrorReport, evaluate_estimates, ledoit_wolf_estimate, pearson_estimate
from .empirical import AR1Params, ErrorPanel, SeriesPanel, fit_ar1, r_tilde_basic, r_tilde_pd
from .forecast import ProjectionEnsemble, RegionWeights, aggregate, compare_models, crps, project
from .lambda_select import LambdaScan, k_criterion, lowess_smooth, select_lambda
from .matrices import (
    CorrelationMatrix,
    PenaltyMatrix,
    SpdFactorization,
    spd_factorize,
    validate_correlation,
)
from .penalty import (
    CovariateTable,
    ScreenReport,
    build_penalty,
    ks_pvalue,
    null_correlation_cdf,
    screen_covariates,
)
from .simulation import SimScenario, StudyReport, default_scenario, run_study, simulate_panel
from .solver import SolveReport, SolverConfig, inner_solve, objective, prox_step, soft_threshold, solve_lpoc

__version__ = "0.1.0"

__all__ = [
    "AR1Params",
    "CorrelationMatrix",
    "CovariateTable",
    "ErrorPanel",
    "ErrorReport",
    "LambdaScan",
    "PenaltyMatrix",
    "ProjectionEnsemble",
    "RegionWeights",
    "ScreenReport",
    "SeriesPanel",
    "SimScenario",
    "SolveReport",
    "SolverConfig",
    "SpdFactorization",
    "StudyReport",
    "aggregate",
    "build_penalty",
    "compare_models",
    "crps",
    "default_scenario",
    "errors",
    "evaluate_estimates",
    "fit_ar1",
    "inner_solve",
    "k_criterion",
    "ks_pvalue",
    "ledoit_wolf_estimate",
    "lowess_smooth",
    "null_correlation_cdf",
    "objective",
    "pearson_estimate",
    "project",
    "prox_step",
    "r_tilde_basic",
    "r_tilde_pd",
    "run_study",
    "screen_covariates",
    "select_lambda",
    "simulate_panel",
    "soft_threshold",
    "solve_lpoc",
    "spd_factorize",
    "validate_correlation",
    "__version__",
]
