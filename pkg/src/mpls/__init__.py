"""Multiple penalized least squares: reweighted Newton and active-set paths.

The library fits 0.5 ||y - X b||^2 plus a weighted combination of
absolute-value and squared penalties on linear transforms of b. Two
engines cover the model zoo: an iterative diagonally-reweighted Newton
solver for any penalty mix at fixed regularization, and an exact
piecewise-linear path solver for the L1-type variants (lasso, adaptive
lasso, the nonnegative garrote family, and their smoothed versions).
"""

from .amnr import (
    AmnrConfig,
    AmnrError,
    KktReport,
    PathKnot,
    Variant,
    amnr_path,
    augment_smooth,
    kkt_check,
    solve_at_lambda,
)
from .bench import Combo, ExperimentPlan, median_auc_exemplar, benchmark_plan, run_experiment, pooled_summary
from .metrics import MetricRow, auc, relative_error, summarize
from .mnr import MnrConfig, MnrError, mnr_solve, update_epsilon
from .model import (
    L1,
    L2,
    ModelSpec,
    PenaltyTerm,
    Problem,
    Solution,
    objective,
    perturbed_objective,
    smooth_gradient,
    split_lambda,
)
from .operators import LinearOperator, apply, custom_operator, make_operator, weighted_gram
from .selection import (
    LambdaGrid,
    SelectionResult,
    degrees_of_freedom,
    gcv,
    lambda_grid,
    ridge_select,
    select_lambda,
)
from .simulation import SimConfig, SimTruth, empirical_snr, generate, make_truth, theoretical_snr

__version__ = "0.1.0"

__all__ = [
    "AmnrConfig",
    "AmnrError",
    "Combo",
    "ExperimentPlan",
    "KktReport",
    "L1",
    "L2",
    "LambdaGrid",
    "LinearOperator",
    "MetricRow",
    "MnrConfig",
    "MnrError",
    "ModelSpec",
    "PathKnot",
    "PenaltyTerm",
    "Problem",
    "SelectionResult",
    "SimConfig",
    "SimTruth",
    "Solution",
    "Variant",
    "amnr_path",
    "apply",
    "auc",
    "augment_smooth",
    "custom_operator",
    "degrees_of_freedom",
    "empirical_snr",
    "gcv",
    "generate",
    "kkt_check",
    "lambda_grid",
    "make_operator",
    "make_truth",
    "median_auc_exemplar",
    "mnr_solve",
    "objective",
    "benchmark_plan",
    "perturbed_objective",
    "relative_error",
    "ridge_select",
    "run_experiment",
    "select_lambda",
    "smooth_gradient",
    "solve_at_lambda",
    "split_lambda",
    "summarize",
    "pooled_summary",
    "theoretical_snr",
    "update_epsilon",
    "weighted_gram",
]
