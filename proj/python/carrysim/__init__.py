"""Simulator of recurrent networks doing binary column arithmetic, with the
halting-time statistics used to compare them against human solvers."""

from ._core import (
    AnovaResult,
    GroupSummary,
    ModelConfig,
    NetworkParams,
    Operation,
    PairwiseComparison,
    PosthocResult,
    TrialRecord,
    answer_steps_by_class,
    anova_from_summary,
    anova_oneway,
    child_seed,
    class_sizes,
    decide_digits,
    enumerate_dataset,
    evaluate_accuracy,
    f_upper_tail,
    games_howell,
    games_howell_from_summary,
    iqr_filter,
    load_params,
    normal_range_cdf,
    read_summary_csv,
    save_params,
    studentized_range_cdf,
    trace,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AnovaResult",
    "GroupSummary",
    "ModelConfig",
    "NetworkParams",
    "Operation",
    "PairwiseComparison",
    "PosthocResult",
    "TrialRecord",
    "answer_steps_by_class",
    "anova_from_summary",
    "anova_oneway",
    "child_seed",
    "class_sizes",
    "decide_digits",
    "enumerate_dataset",
    "evaluate_accuracy",
    "f_upper_tail",
    "games_howell",
    "games_howell_from_summary",
    "iqr_filter",
    "load_params",
    "normal_range_cdf",
    "read_summary_csv",
    "save_params",
    "studentized_range_cdf",
    "trace",
    "train",
]
