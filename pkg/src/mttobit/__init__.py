"""Multi-target Tobit regression: joint fitting of coupled linear relations
under censoring, expectation imputation, and a synthetic benchmark harness."""

from .errors import (
    DegenerateUpdateError,
    MttobitError,
    NumericalError,
    SingularSystemError,
    TableFormatError,
    ValidationError,
)
from .fit import (
    AscentWorkspace,
    censored_log_likelihood,
    fit,
    fit_single_target,
    single_target_view,
    variational_objective,
    variational_objective_single,
)
from .harness import (
    BenchmarkReport,
    CensoringScenario,
    CoefficientSpec,
    ConvergenceProbe,
    RuntimeRow,
    SyntheticSpec,
    apply_censoring,
    benchmark_compare,
    convergence_probe,
    generate_synthetic,
    paired_t_test,
    report_json,
    report_tsv,
    rmse,
    runtime_table,
)
from .impute import impute, impute_with_params, predict
from .io import TableDocument, read_table, write_table
from .model import (
    Dataset,
    FitConfig,
    FitReport,
    ModelParams,
    Observed,
    VariationalState,
    interval_censored,
    left_censored,
    load_model,
    right_censored,
    save_model,
)
from .truncnorm import tn_entropy, tn_log_normalizer, tn_mean, tn_second_moment

__version__ = "0.1.0"

__all__ = [
    "AscentWorkspace",
    "BenchmarkReport",
    "CensoringScenario",
    "CoefficientSpec",
    "ConvergenceProbe",
    "Dataset",
    "DegenerateUpdateError",
    "FitConfig",
    "FitReport",
    "ModelParams",
    "MttobitError",
    "NumericalError",
    "Observed",
    "RuntimeRow",
    "SingularSystemError",
    "SyntheticSpec",
    "TableDocument",
    "TableFormatError",
    "ValidationError",
    "VariationalState",
    "apply_censoring",
    "benchmark_compare",
    "censored_log_likelihood",
    "convergence_probe",
    "fit",
    "fit_single_target",
    "generate_synthetic",
    "impute",
    "impute_with_params",
    "interval_censored",
    "left_censored",
    "load_model",
    "paired_t_test",
    "predict",
    "read_table",
    "report_json",
    "report_tsv",
    "right_censored",
    "rmse",
    "runtime_table",
    "save_model",
    "single_target_view",
    "tn_entropy",
    "tn_log_normalizer",
    "tn_mean",
    "tn_second_moment",
    "variational_objective",
    "variational_objective_single",
    "write_table",
]
