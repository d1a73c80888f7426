"""Sparse varying-coefficient regression with grouped penalties."""
from __future__ import annotations

__version__ = "0.1.0"

from .baselines import LassoFit, fit_lasso_interactions, fit_plasso
from .bench import BenchmarkError, BenchmarkResult, run_benchmark, write_benchmark_csvs
from .data import (
    DataError,
    Dataset,
    GroupSpec,
    StandardizationRecord,
    apply_standardization,
    interaction_features,
    load_dataset_csv,
    load_groups_json,
    save_groups_json,
    singleton_groups,
    standardize,
)
from .metrics import (
    ConfusionCounts,
    SelectionTruth,
    percent_selected,
    roc_points,
    selected_interactions,
    selected_mains,
    selected_modifiers,
    staircase_fpr,
    variable_confusion,
)
from .model import (
    CoefficientSet,
    FitConfig,
    modifier_weights,
    objective_value,
    penalty_value,
    predict,
    residual,
    unstandardize_coef,
)
from .simulate import SimulatedData, generate, setting_one, setting_three, setting_two
from .solver import FitResult, fit_svreg, lambda_max, screen_block
from .tuning import (
    CVResult,
    PathResult,
    coarse_grid,
    cross_validate,
    default_grid,
    fit_path,
    make_folds,
)

__all__ = [
    "__version__",
    "BenchmarkError",
    "BenchmarkResult",
    "CVResult",
    "CoefficientSet",
    "ConfusionCounts",
    "DataError",
    "Dataset",
    "FitConfig",
    "FitResult",
    "GroupSpec",
    "LassoFit",
    "PathResult",
    "SelectionTruth",
    "SimulatedData",
    "StandardizationRecord",
    "apply_standardization",
    "coarse_grid",
    "cross_validate",
    "default_grid",
    "fit_lasso_interactions",
    "fit_path",
    "fit_plasso",
    "fit_svreg",
    "generate",
    "interaction_features",
    "lambda_max",
    "load_dataset_csv",
    "load_groups_json",
    "make_folds",
    "modifier_weights",
    "objective_value",
    "penalty_value",
    "percent_selected",
    "predict",
    "residual",
    "roc_points",
    "run_benchmark",
    "save_groups_json",
    "screen_block",
    "selected_interactions",
    "selected_mains",
    "selected_modifiers",
    "setting_one",
    "setting_three",
    "setting_two",
    "singleton_groups",
    "staircase_fpr",
    "standardize",
    "unstandardize_coef",
    "variable_confusion",
    "write_benchmark_csvs",
]
