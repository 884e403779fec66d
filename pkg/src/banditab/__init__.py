"""Sensitive A/B testing toolkit.

Builds counterfactual effect estimates by cross-fitted doubly robust
estimation, turns them into a weighted two-armed-bandit statistic whose
sign-chasing policy maximizes tail probability, and aggregates permuted
reruns by the Cauchy combination. Ships the limiting spike distribution,
classic baselines (DIM, CUPED, the DML z-test), synthetic benchmark
generators, and a Monte Carlo harness.
"""

from .baselines import BaselineResult, cuped_test, dim_test, zdml_test
from .crossfit import (
    Dataset,
    NuisanceFits,
    assert_out_of_fold_purity,
    ate_point_estimate,
    cross_fit,
    dr_pseudo_outcomes,
)
from .datagen import DgpConfig, generate, true_ate
from .distributions import (
    BanditParams,
    bandit_cdf,
    bandit_density,
    bandit_p_value,
    bandit_tail_prob,
    normal_cdf,
    normal_quantile,
)
from .errors import BanditABError, CrossFitError, DegenerateVarianceError, ValidationError
from .harness import (
    ExperimentGrid,
    ScltReport,
    StudyReport,
    emit_power_curves,
    ingest_csv,
    load_config,
    run_sclt_check,
    run_study,
    simulate_policy_finals,
    write_csv,
    write_study,
)
from .learners import (
    GradientBoostedTrees,
    LearnerSpec,
    LogisticModel,
    RidgeRegression,
    StackingModel,
    fit_learner,
    fit_stacking,
    predict,
)
from .permutation import (
    PermutationPlan,
    TestReport,
    cauchy_antisymmetry_gap,
    cauchy_combine,
    pwtab_test,
)
from .policy import (
    LambdaConfig,
    PolicyTrace,
    PseudoOutcomes,
    arm1_increments,
    fixed_policy_final,
    optimal_finals,
    run_optimal_policy,
    select_lambda_bootstrap,
    select_lambda_threshold,
    statistic_p_value,
)

__version__ = "0.1.0"

__all__ = [
    "BanditABError", "ValidationError", "DegenerateVarianceError", "CrossFitError",
    "BanditParams", "bandit_density", "bandit_cdf", "bandit_tail_prob",
    "bandit_p_value", "normal_cdf", "normal_quantile",
    "PseudoOutcomes", "PolicyTrace", "LambdaConfig", "arm1_increments",
    "run_optimal_policy", "fixed_policy_final", "optimal_finals",
    "statistic_p_value", "select_lambda_threshold", "select_lambda_bootstrap",
    "LearnerSpec", "GradientBoostedTrees", "RidgeRegression", "LogisticModel",
    "StackingModel", "fit_learner", "predict", "fit_stacking",
    "Dataset", "NuisanceFits", "cross_fit", "dr_pseudo_outcomes",
    "ate_point_estimate", "assert_out_of_fold_purity",
    "BaselineResult", "dim_test", "cuped_test", "zdml_test",
    "DgpConfig", "generate", "true_ate",
    "PermutationPlan", "TestReport", "cauchy_combine", "cauchy_antisymmetry_gap",
    "pwtab_test",
    "ExperimentGrid", "StudyReport", "ScltReport", "run_study", "run_sclt_check",
    "simulate_policy_finals", "write_study", "emit_power_curves",
    "ingest_csv", "write_csv", "load_config",
]
