"""PLS and PLS generalized linear regression with component-count selection."""

from .criteria import CriterionResult, CriterionSpec, run_criterion
from .errors import (
    DegenerateVariances,
    DimensionMismatch,
    FoldTooSmall,
    InvalidArgs,
    InvalidDataset,
    ParseError,
    PlsStopError,
    SingularDesign,
    ZeroDenominator,
    ZeroVarianceColumn,
)
from .evaluation import nmse, partition_count, robustness_distribution, summarize_grid, welch_t_test
from .pls import ComponentPath, Dataset, PlsModel, fit, fit_pls, fit_plsglr, predict
from .resampling import ResamplePlan, bca_interval
from .simulation import SimConfig, grid_run, simulate_univ_yx

__version__ = "0.1.0"

__all__ = [
    "ComponentPath",
    "CriterionResult",
    "CriterionSpec",
    "Dataset",
    "DegenerateVariances",
    "DimensionMismatch",
    "FoldTooSmall",
    "InvalidArgs",
    "InvalidDataset",
    "ParseError",
    "PlsModel",
    "PlsStopError",
    "ResamplePlan",
    "SimConfig",
    "SingularDesign",
    "ZeroDenominator",
    "ZeroVarianceColumn",
    "bca_interval",
    "fit",
    "fit_pls",
    "fit_plsglr",
    "grid_run",
    "nmse",
    "partition_count",
    "predict",
    "robustness_distribution",
    "run_criterion",
    "simulate_univ_yx",
    "summarize_grid",
    "welch_t_test",
]
